use std::fmt;
use std::str::FromStr;

use super::kernels::{
    assemble_predictor_backward, assemble_pressure_backward, compute_h_backward, correct_velocity_backward, divergence_backward,
    pressure_cross_backward, velocity_cross_backward, PredictorInputGrad,
};
use crate::error::{Error, Result, Stage};
use crate::linalg::{accumulate_matrix_grad, bicgstab_solve, transpose_solve, Nullspace, SolverKind};
use crate::math::{axpy, Vec3, ZERO3};
use crate::mesh::Domain;
use crate::piso::{Discretization, StepConfig, StepRecord};

/// Which linear-solve Jacobians the backward pass propagates through. Terms that bypass both
/// solves are always kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradientPath {
    Full,
    AdvOnly,
    POnly,
    None,
}

impl GradientPath {
    pub const ALL: [GradientPath; 4] = [GradientPath::Full, GradientPath::AdvOnly, GradientPath::POnly, GradientPath::None];

    pub fn through_advection(self) -> bool {
        matches!(self, GradientPath::Full | GradientPath::AdvOnly)
    }

    pub fn through_pressure(self) -> bool {
        matches!(self, GradientPath::Full | GradientPath::POnly)
    }

    pub fn name(self) -> &'static str {
        match self {
            GradientPath::Full => "full",
            GradientPath::AdvOnly => "adv",
            GradientPath::POnly => "p",
            GradientPath::None => "none",
        }
    }
}

impl fmt::Display for GradientPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradientPath {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(GradientPath::Full),
            "adv" | "advonly" | "adv_only" => Ok(GradientPath::AdvOnly),
            "p" | "ponly" | "p_only" => Ok(GradientPath::POnly),
            "none" => Ok(GradientPath::None),
            other => Err(Error::InvalidInput(format!("unknown gradient path `{other}` (full, adv, p, none)"))),
        }
    }
}

/// Cotangents of a flow state and of the per-step parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct StateGrad {
    pub velocity: Vec<Vec3>,
    pub pressure: Vec<f64>,
    pub boundary: Vec<Vec3>,
    pub source: Vec<Vec3>,
    pub viscosity: f64,
}

impl StateGrad {
    pub fn zeros(d: &Domain) -> Self {
        StateGrad {
            velocity: vec![ZERO3; d.n_cells()],
            pressure: vec![0.0; d.n_cells()],
            boundary: vec![ZERO3; d.n_boundary_faces()],
            source: vec![ZERO3; d.n_cells()],
            viscosity: 0.0,
        }
    }

    /// Seed with a velocity cotangent only.
    pub fn from_velocity(d: &Domain, velocity: Vec<Vec3>) -> Self {
        StateGrad { velocity, ..StateGrad::zeros(d) }
    }

    pub fn add_assign(&mut self, other: &StateGrad) {
        add_vecs(&mut self.velocity, &other.velocity);
        add_vecs(&mut self.boundary, &other.boundary);
        add_vecs(&mut self.source, &other.source);
        self.pressure.iter_mut().zip(&other.pressure).for_each(|(a, b)| *a += b);
        self.viscosity += other.viscosity;
    }

    /// All entries flattened in a fixed order (velocity, pressure, boundary, source, ν).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.velocity.iter().flatten().copied().collect();
        out.extend_from_slice(&self.pressure);
        out.extend(self.boundary.iter().flatten());
        out.extend(self.source.iter().flatten());
        out.push(self.viscosity);
        out
    }
}

fn add_vecs(a: &mut [Vec3], b: &[Vec3]) {
    for (x, y) in a.iter_mut().zip(b) {
        axpy(x, 1.0, *y);
    }
}

fn is_zero3(v: &[Vec3]) -> bool {
    v.iter().all(|x| *x == ZERO3)
}

fn is_zero(v: &[f64]) -> bool {
    v.iter().all(|x| *x == 0.0)
}

/// Lane routing: cotangent in lane `l` passing through an advection (pressure) solve
/// continues in lane `adv[l]` (`pressure[l]`), or is dropped when `None`.
pub(crate) struct Routing {
    pub lanes: usize,
    pub adv: Vec<Option<usize>>,
    pub pressure: Vec<Option<usize>>,
}

impl Routing {
    fn path(path: GradientPath) -> Self {
        Routing { lanes: 1, adv: vec![path.through_advection().then_some(0)], pressure: vec![path.through_pressure().then_some(0)] }
    }

    /// Four lanes tagged by the solve kinds crossed so far: bit 0 advection, bit 1 pressure.
    fn tagged() -> Self {
        Routing { lanes: 4, adv: (0..4).map(|l| Some(l | 1)).collect(), pressure: (0..4).map(|l| Some(l | 2)).collect() }
    }
}

/// Reverse-mode step under a gradient path. `grad.velocity`/`grad.pressure` are the
/// cotangents of the step output; the result holds the cotangents of the step input state
/// and this step's boundary, source and viscosity contributions.
pub fn backward_step(disc: &Discretization, rec: &StepRecord, grad: &StateGrad, path: GradientPath, cfg: &StepConfig) -> Result<StateGrad> {
    let mut lanes = backward_lanes(disc, rec, grad, &Routing::path(path), cfg)?;
    Ok(lanes.pop().expect("one lane"))
}

/// Decomposes the full-path cotangent by the set of solve kinds each contribution crossed.
#[derive(Clone, Debug)]
pub struct PathDecomposition {
    /// Contributions crossing no linear solve (the `None` path).
    pub bypass: StateGrad,
    /// Contributions crossing only advection solves.
    pub advection: StateGrad,
    /// Contributions crossing only pressure solves.
    pub pressure: StateGrad,
    /// Contributions crossing both kinds.
    pub mixed: StateGrad,
}

impl PathDecomposition {
    pub fn total(&self) -> StateGrad {
        let mut t = self.bypass.clone();
        t.add_assign(&self.advection);
        t.add_assign(&self.pressure);
        t.add_assign(&self.mixed);
        t
    }
}

pub fn backward_step_decomposed(disc: &Discretization, rec: &StepRecord, grad: &StateGrad, cfg: &StepConfig) -> Result<PathDecomposition> {
    let mut lanes = backward_lanes(disc, rec, grad, &Routing::tagged(), cfg)?;
    let mixed = lanes.pop().unwrap();
    let pressure = lanes.pop().unwrap();
    let advection = lanes.pop().unwrap();
    let bypass = lanes.pop().unwrap();
    Ok(PathDecomposition { bypass, advection, pressure, mixed })
}

fn backward_lanes(
    disc: &Discretization,
    rec: &StepRecord,
    grad: &StateGrad,
    routing: &Routing,
    cfg: &StepConfig,
) -> Result<Vec<StateGrad>> {
    let d = disc.domain();
    let n = d.n_cells();
    let dim = d.dim();
    let lanes = routing.lanes;
    let slots = &d.pattern().diag_slot;
    let a = rec.diagonal(disc);
    let cross = !disc.is_orthogonal();
    let nu = rec.viscosity;
    let aopts = cfg.adjoint_options();

    let mut out: Vec<StateGrad> = (0..lanes).map(|_| StateGrad::zeros(d)).collect();
    let mut d_c = vec![vec![0.0; rec.predictor.nnz()]; lanes];
    let mut d_rhs_full = vec![vec![ZERO3; n]; lanes];
    let mut g_u: Vec<Vec<Vec3>> = (0..lanes).map(|l| if l == 0 { grad.velocity.clone() } else { vec![ZERO3; n] }).collect();
    let mut g_p: Vec<Vec<f64>> = (0..lanes).map(|l| if l == 0 { grad.pressure.clone() } else { vec![0.0; n] }).collect();

    for (ci, corr) in rec.correctors.iter().enumerate().rev() {
        let kk = corr.pressures.len();
        let p_final = &corr.pressures[kk - 1];
        let mut d_pk = vec![vec![vec![0.0; n]; kk]; lanes];
        let mut d_h = vec![vec![ZERO3; n]; lanes];
        let mut d_a = vec![vec![0.0; n]; lanes];
        let mut d_prior = vec![vec![0.0; n]; lanes];
        let mut d_pm = vec![vec![0.0; corr.matrix.nnz()]; lanes];
        let mut d_div = vec![vec![0.0; n]; lanes];
        for l in 0..lanes {
            correct_velocity_backward(d, &a, p_final, &g_u[l], &mut d_h[l], &mut d_a[l], &mut d_pk[l][kk - 1]);
            d_pk[l][kk - 1].iter_mut().zip(&g_p[l]).for_each(|(x, y)| *x += y);
        }
        for k in (0..kk).rev() {
            let mut d_b = vec![vec![0.0; n]; lanes];
            for l in 0..lanes {
                if is_zero(&d_pk[l][k]) {
                    continue;
                }
                if let Some(t) = routing.pressure[l] {
                    let (gb, rep) = transpose_solve(&corr.matrix, &d_pk[l][k], SolverKind::Cg(Nullspace::Constant), &aopts);
                    if !rep.converged {
                        return Err(Error::SolverFailure { stage: Stage::AdjointPressure { corrector: ci }, report: rep });
                    }
                    d_b[t].iter_mut().zip(&gb).for_each(|(x, y)| *x += y);
                }
            }
            for l in 0..lanes {
                if is_zero(&d_b[l]) {
                    continue;
                }
                accumulate_matrix_grad(&mut d_pm[l], &d_b[l], &corr.pressures[k], &corr.matrix);
                d_div[l].iter_mut().zip(&d_b[l]).for_each(|(x, y)| *x += y);
                if cross {
                    let neg: Vec<f64> = d_b[l].iter().map(|x| -x).collect();
                    let prev = if k == 0 { &corr.prior_pressure } else { &corr.pressures[k - 1] };
                    let target = if k == 0 { &mut d_prior[l] } else { &mut d_pk[l][k - 1] };
                    pressure_cross_backward(disc, &a, prev, &neg, target, &mut d_a[l]);
                }
            }
        }
        for l in 0..lanes {
            assemble_pressure_backward(d, &a, &d_pm[l], &mut d_a[l]);
            divergence_backward(d, &d_div[l], &mut d_h[l], &mut out[l].boundary);
            let mut d_in = vec![ZERO3; n];
            compute_h_backward(&rec.predictor, slots, &corr.input, &corr.h, &d_h[l], &mut d_rhs_full[l], &mut d_in, &mut d_c[l]);
            for i in 0..n {
                d_c[l][slots[i]] += d_a[l][i];
            }
            g_u[l] = d_in;
            g_p[l] = std::mem::take(&mut d_prior[l]);
        }
    }
    for l in 0..lanes {
        out[l].pressure = std::mem::take(&mut g_p[l]);
    }

    let iters = &rec.predictor_iterates;
    let mc = iters.len();
    let mut g_it: Vec<Vec<Vec<Vec3>>> =
        (0..lanes).map(|l| (0..mc).map(|m| if m + 1 == mc { std::mem::take(&mut g_u[l]) } else { vec![ZERO3; n] }).collect()).collect();
    let mut d_rhs = d_rhs_full.clone();
    if cross {
        for l in 0..lanes {
            let v = if mc > 1 { &iters[mc - 2] } else { &rec.velocity };
            let (head, _) = g_it[l].split_at_mut(mc - 1);
            let StateGrad { velocity, boundary, viscosity, .. } = &mut out[l];
            let target = if mc > 1 { &mut head[mc - 2] } else { velocity };
            velocity_cross_backward(disc, v, &rec.boundary, nu, &d_rhs_full[l], target, boundary, viscosity);
        }
    }
    let mut ct = None;
    for m in (0..mc).rev() {
        let mut d_r = vec![vec![ZERO3; n]; lanes];
        for l in 0..lanes {
            if is_zero3(&g_it[l][m]) {
                continue;
            }
            let Some(t) = routing.adv[l] else { continue };
            let ct = ct.get_or_insert_with(|| rec.predictor.transpose());
            for comp in 0..dim {
                let g: Vec<f64> = g_it[l][m].iter().map(|v| v[comp]).collect();
                if is_zero(&g) {
                    continue;
                }
                let (x, rep) = bicgstab_solve(ct, &g, &vec![0.0; n], &aopts, cfg.velocity_precond);
                if !rep.converged {
                    return Err(Error::SolverFailure { stage: Stage::AdjointPredictor { component: comp }, report: rep });
                }
                for (dst, v) in d_r[t].iter_mut().zip(x) {
                    dst[comp] += v;
                }
            }
        }
        for l in 0..lanes {
            if is_zero3(&d_r[l]) {
                continue;
            }
            for comp in 0..dim {
                let g: Vec<f64> = d_r[l].iter().map(|v| v[comp]).collect();
                let x: Vec<f64> = iters[m].iter().map(|v| v[comp]).collect();
                accumulate_matrix_grad(&mut d_c[l], &g, &x, &rec.predictor);
            }
            for (dst, v) in d_rhs[l].iter_mut().zip(&d_r[l]) {
                axpy(dst, 1.0, *v);
            }
            if cross {
                let v = if m > 0 { &iters[m - 1] } else { &rec.velocity };
                let (head, _) = g_it[l].split_at_mut(m);
                let StateGrad { velocity, boundary, viscosity, .. } = &mut out[l];
                let target = if m > 0 { &mut head[m - 1] } else { velocity };
                velocity_cross_backward(disc, v, &rec.boundary, nu, &d_r[l], target, boundary, viscosity);
            }
        }
    }
    for l in 0..lanes {
        let mut pg = PredictorInputGrad::zeros(d);
        assemble_predictor_backward(d, &rec.boundary, &rec.fluxes, nu, rec.dt, &d_c[l], &d_rhs[l], &mut pg);
        add_vecs(&mut out[l].velocity, &pg.velocity);
        add_vecs(&mut out[l].boundary, &pg.boundary);
        add_vecs(&mut out[l].source, &pg.source);
        out[l].viscosity += pg.viscosity;
    }
    Ok(out)
}
