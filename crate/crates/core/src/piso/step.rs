use super::discretization::Discretization;
use super::kernels::{
    assemble_predictor, assemble_pressure, compute_h, correct_velocity, divergence, face_fluxes, pressure_cross, velocity_cross, FaceFluxes,
};
use crate::error::{Error, Result, Stage};
use crate::linalg::{bicgstab_solve, cg_solve, CsrMatrix, Nullspace, Precond, SolveOptions};
use crate::math::{add, Vec3, ZERO3};
use crate::mesh::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl Precision {
    pub fn default_tolerance(self) -> f64 {
        match self {
            Precision::Single => 1e-5,
            Precision::Double => 1e-8,
        }
    }

    #[inline]
    pub fn round(self, x: f64) -> f64 {
        match self {
            Precision::Single => x as f32 as f64,
            Precision::Double => x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Precision::Single => "single",
            Precision::Double => "double",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepConfig {
    pub viscosity: f64,
    pub correctors: usize,
    /// Extra momentum/pressure solves refreshing the deferred cross terms. `None` selects 0 on
    /// orthogonal meshes and 2 when the mesh skew exceeds `skew_threshold`.
    pub non_orthogonal_correctors: Option<usize>,
    pub skew_threshold: f64,
    pub precision: Precision,
    /// Relative residual target of forward solves; precision default when `None`.
    pub tolerance: Option<f64>,
    /// Relative residual target of adjoint solves; forward tolerance when `None`.
    pub adjoint_tolerance: Option<f64>,
    pub max_iter: usize,
    pub velocity_precond: Precond,
    /// Keep the intermediates needed by the backward pass.
    pub record: bool,
}

impl StepConfig {
    pub fn new(viscosity: f64) -> Self {
        StepConfig {
            viscosity,
            correctors: 2,
            non_orthogonal_correctors: None,
            skew_threshold: 1e-3,
            precision: Precision::Double,
            tolerance: None,
            adjoint_tolerance: None,
            max_iter: 5000,
            velocity_precond: Precond::Fallback,
            record: false,
        }
    }

    pub fn recording(mut self, record: bool) -> Self {
        self.record = record;
        self
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance.unwrap_or_else(|| self.precision.default_tolerance())
    }

    pub fn adjoint_tolerance(&self) -> f64 {
        self.adjoint_tolerance.unwrap_or_else(|| self.tolerance())
    }

    pub fn non_orthogonal_count(&self, disc: &Discretization) -> usize {
        match self.non_orthogonal_correctors {
            Some(n) => n,
            None if disc.skew() > self.skew_threshold => 2,
            None => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.correctors == 0 {
            return Err(Error::InvalidInput("at least one pressure corrector is required".into()));
        }
        if !(self.viscosity >= 0.0) || !self.viscosity.is_finite() {
            return Err(Error::InvalidInput(format!("viscosity must be nonnegative, got {}", self.viscosity)));
        }
        Ok(())
    }

    pub(crate) fn velocity_options(&self) -> SolveOptions {
        SolveOptions::new(self.tolerance(), self.max_iter)
    }

    /// Pressure solves also cap the absolute residual at the tolerance, which bounds the
    /// per-cell divergence independently of the right-hand-side magnitude.
    pub(crate) fn pressure_options(&self) -> SolveOptions {
        SolveOptions::new(self.tolerance(), self.max_iter).with_absolute(self.tolerance())
    }

    pub(crate) fn adjoint_options(&self) -> SolveOptions {
        SolveOptions::new(self.adjoint_tolerance(), self.max_iter)
    }
}

/// Velocity, pressure and boundary velocities of a domain (global cell order).
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub velocity: Vec<Vec3>,
    pub pressure: Vec<f64>,
    /// Per boundary face, in [`Domain::boundary_faces`] order.
    pub boundary: Vec<Vec3>,
    pub time: f64,
    pub dt: f64,
}

impl FlowState {
    /// Fluid at rest with the boundary velocities declared by the mesh.
    pub fn at_rest(domain: &Domain, dt: f64) -> Self {
        FlowState {
            velocity: vec![ZERO3; domain.n_cells()],
            pressure: vec![0.0; domain.n_cells()],
            boundary: domain.initial_boundary().to_vec(),
            time: 0.0,
            dt,
        }
    }

    pub fn block_velocity<'a>(&'a self, domain: &Domain, block: usize) -> &'a [Vec3] {
        &self.velocity[domain.block_range(block)]
    }

    pub fn block_pressure<'a>(&'a self, domain: &Domain, block: usize) -> &'a [f64] {
        &self.pressure[domain.block_range(block)]
    }
}

#[derive(Clone, Debug)]
pub struct CorrectorRecord {
    /// Velocity entering `H u` (the predictor result or the previous corrector's output).
    pub input: Vec<Vec3>,
    pub h: Vec<Vec3>,
    pub divergence: Vec<f64>,
    pub matrix: CsrMatrix,
    /// Pressure feeding the first cross-flux evaluation.
    pub prior_pressure: Vec<f64>,
    /// Pressure iterates, one per non-orthogonal pass; the last one is the corrector result.
    pub pressures: Vec<Vec<f64>>,
    pub output: Vec<Vec3>,
}

/// Forward intermediates of one step, sufficient to run every backward kernel.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub dt: f64,
    pub viscosity: f64,
    pub velocity: Vec<Vec3>,
    pub pressure: Vec<f64>,
    pub boundary: Vec<Vec3>,
    pub source: Vec<Vec3>,
    pub fluxes: FaceFluxes,
    pub predictor: CsrMatrix,
    pub rhs: Vec<Vec3>,
    /// Right-hand side including the cross terms of the last predictor pass.
    pub rhs_full: Vec<Vec3>,
    /// Predictor iterates; iterate `m` used cross terms evaluated at iterate `m − 1`
    /// (the old velocity for `m = 0`).
    pub predictor_iterates: Vec<Vec<Vec3>>,
    pub correctors: Vec<CorrectorRecord>,
}

impl StepRecord {
    pub fn diagonal(&self, disc: &Discretization) -> Vec<f64> {
        disc.pattern().diag_slot.iter().map(|&s| self.predictor.values()[s]).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepDiagnostics {
    /// Largest cell-integrated divergence of the final corrector's face fluxes.
    pub max_divergence: f64,
    pub velocity_iterations: usize,
    pub pressure_iterations: usize,
    pub velocity_preconditioned: bool,
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: FlowState,
    pub record: Option<StepRecord>,
    pub diagnostics: StepDiagnostics,
}

pub(crate) fn solve_momentum(
    c: &CsrMatrix,
    rhs: &[Vec3],
    x0: &[Vec3],
    dim: usize,
    opts: &SolveOptions,
    precond: Precond,
    diag: &mut StepDiagnostics,
) -> Result<Vec<Vec3>> {
    let mut out = vec![ZERO3; rhs.len()];
    for comp in 0..dim {
        let b: Vec<f64> = rhs.iter().map(|v| v[comp]).collect();
        let x: Vec<f64> = x0.iter().map(|v| v[comp]).collect();
        let (x, rep) = bicgstab_solve(c, &b, &x, opts, precond);
        if !rep.converged {
            return Err(Error::SolverFailure { stage: Stage::Predictor { component: comp }, report: rep });
        }
        diag.velocity_iterations += rep.iterations;
        diag.velocity_preconditioned |= rep.preconditioned;
        for (o, v) in out.iter_mut().zip(x) {
            o[comp] = v;
        }
    }
    Ok(out)
}

/// Advances `state` by one implicit-Euler PISO step with time step `state.dt`.
///
/// Boundary velocities are taken from `state.boundary` and held fixed during the step;
/// `source` is a per-cell body force (empty for none).
pub fn piso_step(disc: &Discretization, state: &FlowState, source: &[Vec3], cfg: &StepConfig) -> Result<StepOutput> {
    cfg.validate()?;
    let d = disc.domain();
    let n = d.n_cells();
    if state.velocity.len() != n || state.pressure.len() != n || state.boundary.len() != d.n_boundary_faces() {
        return Err(Error::InvalidInput("state shape does not match the domain".into()));
    }
    if !source.is_empty() && source.len() != n {
        return Err(Error::InvalidInput("source field shape does not match the domain".into()));
    }
    let dim = d.dim();
    let nu = cfg.viscosity;
    let dt = state.dt;
    let n_orth = cfg.non_orthogonal_count(disc);
    let cross = !disc.is_orthogonal();
    let mut diag = StepDiagnostics::default();

    let fluxes = face_fluxes(d, &state.velocity, &state.boundary);
    let sys = assemble_predictor(d, &state.velocity, &state.boundary, &fluxes, nu, dt, source)?;
    let c = &sys.matrix;
    let slots = &d.pattern().diag_slot;
    let a: Vec<f64> = slots.iter().map(|&s| c.values()[s]).collect();

    let vopts = cfg.velocity_options();
    let mut iterates: Vec<Vec<Vec3>> = Vec::with_capacity(n_orth + 1);
    let mut rhs_full = sys.rhs.clone();
    for m in 0..=n_orth {
        let v = if m == 0 { &state.velocity } else { &iterates[m - 1] };
        if cross {
            let r = velocity_cross(disc, v, &state.boundary, nu);
            rhs_full = sys.rhs.iter().zip(&r).map(|(a, b)| add(*a, *b)).collect();
        }
        let u = solve_momentum(c, &rhs_full, v, dim, &vopts, cfg.velocity_precond, &mut diag)?;
        iterates.push(u);
    }

    let popts = cfg.pressure_options();
    let mut correctors = Vec::with_capacity(cfg.correctors);
    let mut u_cur = iterates.last().unwrap().clone();
    let mut p_prior = state.pressure.clone();
    for corr in 0..cfg.correctors {
        let h = compute_h(c, slots, &rhs_full, &u_cur);
        let div = divergence(d, &h, &state.boundary);
        let pm = assemble_pressure(d, &a)?;
        let mut pressures: Vec<Vec<f64>> = Vec::with_capacity(n_orth + 1);
        for k in 0..=n_orth {
            let prev = if k == 0 { &p_prior } else { &pressures[k - 1] };
            let b: Vec<f64> = if cross {
                let r = pressure_cross(disc, &a, prev);
                div.iter().zip(&r).map(|(x, y)| x - y).collect()
            } else {
                div.clone()
            };
            let (p, rep) = cg_solve(&pm, &b, prev, &popts, Nullspace::Constant);
            if !rep.converged {
                return Err(Error::SolverFailure { stage: Stage::Pressure { corrector: corr }, report: rep });
            }
            diag.pressure_iterations += rep.iterations;
            pressures.push(p);
        }
        let p = pressures.last().unwrap();
        let u_new = correct_velocity(d, &h, &a, p);

        if corr + 1 == cfg.correctors {
            let mut res = pm.mul_vec(p);
            if cross {
                let r = pressure_cross(disc, &a, p);
                res.iter_mut().zip(&r).for_each(|(x, y)| *x += y);
            }
            let mean_div = div.iter().sum::<f64>() / n as f64;
            diag.max_divergence = div.iter().zip(&res).fold(0.0f64, |m, (x, y)| m.max((x - mean_div - y).abs()));
        }

        let next_prior = p.clone();
        correctors.push(CorrectorRecord {
            input: std::mem::replace(&mut u_cur, u_new.clone()),
            h,
            divergence: div,
            matrix: pm,
            prior_pressure: std::mem::replace(&mut p_prior, next_prior),
            pressures,
            output: u_new,
        });
    }

    let prec = cfg.precision;
    let velocity: Vec<Vec3> = u_cur.iter().map(|v| v.map(|x| prec.round(x))).collect();
    let pressure: Vec<f64> = p_prior.iter().map(|&x| prec.round(x)).collect();
    let next = FlowState { velocity, pressure, boundary: state.boundary.clone(), time: state.time + dt, dt };

    let record = cfg.record.then(|| StepRecord {
        dt,
        viscosity: nu,
        velocity: state.velocity.clone(),
        pressure: state.pressure.clone(),
        boundary: state.boundary.clone(),
        source: source.to_vec(),
        fluxes,
        rhs: sys.rhs.clone(),
        predictor: sys.matrix,
        rhs_full,
        predictor_iterates: iterates,
        correctors,
    });
    Ok(StepOutput { state: next, record, diagnostics: diag })
}
