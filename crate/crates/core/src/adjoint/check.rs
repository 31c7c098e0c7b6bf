//! Finite-difference verification of the backward kernels and of recorded rollouts.

use std::fmt;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::{
    assemble_predictor_backward, assemble_pressure_backward, compute_h_backward, correct_velocity_backward, divergence_backward,
    face_fluxes_backward, pressure_cross_backward, velocity_cross_backward, PredictorInputGrad,
};
use super::step::{backward_step, GradientPath, StateGrad};
use super::tape::{backward_rollout, rollout};
use crate::error::Result;
use crate::linalg::{accumulate_matrix_grad, solve, transpose_solve, CsrMatrix, Nullspace, SolveOptions, SolverKind};
use crate::math::{dot_slices, flatten, unflatten, Vec3, ZERO3};
use crate::mesh::{BlockSpec, BoundarySpec, Domain, Orientation, Side};
use crate::piso::kernels::{
    assemble_predictor, assemble_pressure, compute_h, correct_velocity, divergence, face_fluxes, pressure_cross, velocity_cross,
};
use crate::piso::{piso_step, Discretization, FlowState, StepConfig};

pub const GRADCHECK_THRESHOLD: f64 = 1e-4;

/// Gradients whose magnitude stays below this in both the analytic and numeric estimate are
/// compared in absolute terms.
const ABS_FLOOR: f64 = 1e-7;

/// Central-difference step for an input of magnitude `x`.
pub fn fd_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * x.abs().max(1.0)
}

/// `max |a − n| / max(‖n‖∞, ‖a‖∞)`; infinite when any entry is non-finite.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    if analytic.iter().chain(numeric).any(|x| !x.is_finite()) {
        return f64::INFINITY;
    }
    let diff = analytic.iter().zip(numeric).fold(0.0f64, |m, (a, n)| m.max((a - n).abs()));
    let scale = analytic.iter().chain(numeric).fold(ABS_FLOOR, |m, x| m.max(x.abs()));
    diff / scale
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckLine {
    pub case: String,
    pub stage: String,
    pub input: String,
    pub error: f64,
    pub threshold: f64,
    /// Number of input entries compared.
    pub checked: usize,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.error.is_finite() && self.error <= self.threshold
    }
}

impl fmt::Display for CheckLine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{} {} {:.3e} {}", self.case, self.stage, self.input, self.error, if self.passed() { "PASS" } else { "FAIL" })
    }
}

/// Machine-readable report: one `case/stage input max_rel_err PASS|FAIL` line per check.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GradCheckReport {
    pub lines: Vec<CheckLine>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.lines.is_empty() && self.lines.iter().all(CheckLine::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckLine> {
        self.lines.iter().filter(|l| !l.passed())
    }

    pub fn max_error(&self) -> f64 {
        self.lines.iter().fold(0.0, |m, l| if l.error.is_nan() { f64::INFINITY } else { m.max(l.error) })
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        write!(f, "# {} checks, {} failed, max error {:.3e}", self.lines.len(), self.failures().count(), self.max_error())
    }
}

/// Compares analytic gradients against central differences on a random subset of entries.
pub struct Checker {
    rng: ChaCha8Rng,
    case: String,
    pub max_samples: usize,
    pub threshold: f64,
    pub report: GradCheckReport,
}

impl Checker {
    pub fn new(seed: u64, max_samples: usize) -> Self {
        Checker {
            rng: ChaCha8Rng::seed_from_u64(seed),
            case: String::new(),
            max_samples,
            threshold: GRADCHECK_THRESHOLD,
            report: GradCheckReport::default(),
        }
    }

    pub fn set_case(&mut self, name: &str) {
        self.case = name.to_string();
    }

    /// `loss` evaluates the scalar objective with this input replaced by its argument.
    pub fn check(&mut self, stage: &str, input: &str, x: &[f64], analytic: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> &CheckLine {
        assert_eq!(x.len(), analytic.len(), "{stage}/{input}: gradient shape");
        let mut idx: Vec<usize> =
            if x.len() <= self.max_samples { (0..x.len()).collect() } else { sample(&mut self.rng, x.len(), self.max_samples).into_vec() };
        idx.sort_unstable();
        let mut xp = x.to_vec();
        let mut numeric = Vec::with_capacity(idx.len());
        for &i in &idx {
            let h = fd_step(x[i]);
            xp[i] = x[i] + h;
            let up = loss(&xp);
            xp[i] = x[i] - h;
            let down = loss(&xp);
            xp[i] = x[i];
            numeric.push((up - down) / (2.0 * h));
        }
        let sampled: Vec<f64> = idx.iter().map(|&i| analytic[i]).collect();
        self.report.lines.push(CheckLine {
            case: self.case.clone(),
            stage: stage.to_string(),
            input: input.to_string(),
            error: relative_error(&sampled, &numeric),
            threshold: self.threshold,
            checked: idx.len(),
        });
        self.report.lines.last().unwrap()
    }

    fn vec3(&mut self, len: usize, dim: usize) -> Vec<Vec3> {
        (0..len)
            .map(|_| {
                let mut v = ZERO3;
                for c in v.iter_mut().take(dim) {
                    *c = self.rng.gen_range(-1.0..1.0);
                }
                v
            })
            .collect()
    }

    fn scalars(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }
}

/// A small flow problem used by the gradient checks.
#[derive(Clone, Debug)]
pub struct CheckCase {
    pub name: String,
    pub disc: Discretization,
    pub state: FlowState,
    pub source: Vec<Vec3>,
    pub config: StepConfig,
}

/// Tight solver settings so that finite differences resolve the gradients.
pub fn check_config(nu: f64) -> StepConfig {
    let mut cfg = StepConfig::new(nu);
    cfg.tolerance = Some(1e-13);
    cfg.adjoint_tolerance = Some(1e-13);
    cfg.max_iter = 20_000;
    cfg
}

fn check_options() -> SolveOptions {
    SolveOptions::new(1e-13, 20_000)
}

fn jittered(dim: usize, res: [usize; 3], amount: f64, rng: &mut ChaCha8Rng, map: impl Fn(Vec3) -> Vec3) -> Result<BlockSpec> {
    let mut r = res;
    if dim == 2 {
        r[2] = 1;
    }
    let vd = [r[0] + 1, r[1] + 1, if dim == 3 { r[2] + 1 } else { 1 }];
    let mut offsets = vec![ZERO3; vd.iter().product()];
    for k in 0..vd[2] {
        for j in 0..vd[1] {
            for i in 0..vd[0] {
                let ijk = [i, j, k];
                let interior = (0..dim).all(|a| ijk[a] > 0 && ijk[a] < vd[a] - 1);
                if interior {
                    let o = &mut offsets[i + vd[0] * (j + vd[1] * k)];
                    for c in o.iter_mut().take(dim) {
                        *c = rng.gen_range(-amount..amount);
                    }
                }
            }
        }
    }
    BlockSpec::from_map(dim, r, |x| {
        let (i, j, k) = (x[0] as usize, x[1] as usize, x[2] as usize);
        let o = offsets[i + vd[0] * (j + vd[1] * k)];
        let mut p = ZERO3;
        for a in 0..dim {
            p[a] = (x[a] + o[a]) / r[a] as f64;
        }
        map(p)
    })
}

fn random_state(d: &Domain, dt: f64, rng: &mut ChaCha8Rng) -> (FlowState, Vec<Vec3>) {
    let dim = d.dim();
    let mut rv = |len: usize, s: f64| -> Vec<Vec3> {
        (0..len)
            .map(|_| {
                let mut v = ZERO3;
                for c in v.iter_mut().take(dim) {
                    *c = s * rng.gen_range(-1.0..1.0);
                }
                v
            })
            .collect()
    };
    let velocity = rv(d.n_cells(), 1.0);
    let boundary = rv(d.n_boundary_faces(), 0.5);
    let source = rv(d.n_cells(), 0.5);
    let pressure = (0..d.n_cells()).map(|_| rng.gen_range(-0.2..0.2)).collect();
    (FlowState { velocity, pressure, boundary, time: 0.0, dt }, source)
}

fn make_case(name: &str, domain: Domain, nu: f64, dt: f64, rng: &mut ChaCha8Rng) -> CheckCase {
    let (state, source) = random_state(&domain, dt, rng);
    CheckCase { name: name.into(), disc: Discretization::new(domain), state, source, config: check_config(nu) }
}

/// Jittered 6×6 block, a two-block mesh joined with a 180° turn, a rotated and swirled
/// non-orthogonal block, and a jittered 4×4×4 block periodic in x.
pub fn standard_cases(seed: u64) -> Result<Vec<CheckCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::new();

    let b = jittered(2, [6, 6, 1], 0.15, &mut rng, |p| p)?;
    cases.push(make_case("block6", Domain::new(vec![b])?, 0.05, 0.1, &mut rng));

    // Block 1 has both local axes reversed, so its +x side meets block 0's +x side.
    let a = BlockSpec::uniform(2, [3, 4, 1], ZERO3, [1.0, 1.0, 1.0])?.with_boundary(
        Side::upper(0),
        BoundarySpec::Connection {
            block: 1,
            side: Side::upper(0),
            orientation: Orientation { axis_map: [0, 1, 2], flip: [false, true, false] },
        },
    );
    let b = BlockSpec::from_map(2, [3, 4, 1], |x| [2.0 - x[0] / 3.0, 1.0 - x[1] / 4.0, 0.0])?.with_boundary(
        Side::upper(0),
        BoundarySpec::Connection {
            block: 0,
            side: Side::upper(0),
            orientation: Orientation { axis_map: [0, 1, 2], flip: [false, true, false] },
        },
    );
    cases.push(make_case("two_block", Domain::new(vec![a, b])?, 0.05, 0.1, &mut rng));

    let (s, c) = (30f64.to_radians()).sin_cos();
    let b = BlockSpec::from_map(2, [6, 6, 1], |x| {
        let p = crate::mesh::generate::swirl([x[0] / 6.0, x[1] / 6.0, 0.0], 0.4);
        [c * p[0] - s * p[1], s * p[0] + c * p[1], 0.0]
    })?;
    cases.push(make_case("rotated", Domain::new(vec![b])?, 0.05, 0.1, &mut rng));

    let mut b = jittered(3, [4, 4, 4], 0.1, &mut rng, |p| p)?;
    crate::mesh::generate::make_periodic(&mut b, 0);
    cases.push(make_case("cube4", Domain::new(vec![b])?, 0.05, 0.1, &mut rng));
    Ok(cases)
}

fn weighted(w: &[Vec3], y: &[Vec3]) -> f64 {
    w.iter().zip(y).map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).sum()
}

fn flux_dot(w: &[[f64; 6]], y: &[[f64; 6]]) -> f64 {
    w.iter().zip(y).map(|(a, b)| a.iter().zip(b).map(|(x, z)| x * z).sum::<f64>()).sum()
}

/// Runs every kernel check, the composite step check and 1/3-step rollout checks on `case`.
pub fn check_case(ck: &mut Checker, case: &CheckCase) -> Result<()> {
    ck.set_case(&case.name);
    let disc = &case.disc;
    let d = disc.domain();
    let dim = d.dim();
    let n = d.n_cells();
    let nb = d.n_boundary_faces();
    let cfg = &case.config;
    let st = &case.state;
    let nu = cfg.viscosity;
    let dt = st.dt;
    let cross = !disc.is_orthogonal();
    let slots = &d.pattern().diag_slot;
    let rec = piso_step(disc, st, &case.source, &cfg.clone().recording(true))?.record.expect("recorded");
    let a_diag = rec.diagonal(disc);
    let fu = |x: &[f64]| unflatten(x, dim);

    // Face fluxes.
    {
        let w: Vec<[f64; 6]> = (0..n).map(|_| std::array::from_fn(|_| ck.rng.gen_range(-1.0..1.0))).collect();
        let (mut gu, mut gb) = (vec![ZERO3; n], vec![ZERO3; nb]);
        face_fluxes_backward(d, &w, &mut gu, &mut gb);
        let u0 = flatten(&st.velocity, dim);
        ck.check("face_flux", "velocity", &u0, &flatten(&gu, dim), |x| flux_dot(&w, &face_fluxes(d, &fu(x), &st.boundary)));
        let b0 = flatten(&st.boundary, dim);
        ck.check("face_flux", "boundary", &b0, &flatten(&gb, dim), |x| flux_dot(&w, &face_fluxes(d, &st.velocity, &fu(x))));
    }

    // Predictor assembly.
    {
        let wc = ck.scalars(rec.predictor.nnz());
        let wr = ck.vec3(n, dim);
        let loss = |u: &[Vec3], b: &[Vec3], s: &[Vec3], nu: f64| {
            let fl = face_fluxes(d, u, b);
            let sys = assemble_predictor(d, u, b, &fl, nu, dt, s).expect("assembly");
            dot_slices(&wc, sys.matrix.values()) + weighted(&wr, &sys.rhs)
        };
        let mut g = PredictorInputGrad::zeros(d);
        assemble_predictor_backward(d, &st.boundary, &rec.fluxes, nu, dt, &wc, &wr, &mut g);
        let (u, b, s) = (&st.velocity, &st.boundary, &case.source);
        ck.check("predictor_assembly", "velocity", &flatten(u, dim), &flatten(&g.velocity, dim), |x| loss(&fu(x), b, s, nu));
        ck.check("predictor_assembly", "boundary", &flatten(b, dim), &flatten(&g.boundary, dim), |x| loss(u, &fu(x), s, nu));
        ck.check("predictor_assembly", "source", &flatten(s, dim), &flatten(&g.source, dim), |x| loss(u, b, &fu(x), nu));
        ck.check("predictor_assembly", "viscosity", &[nu], &[g.viscosity], |x| loss(u, b, s, x[0]));
    }

    if cross {
        let w = ck.vec3(n, dim);
        let (mut gv, mut gb, mut gn) = (vec![ZERO3; n], vec![ZERO3; nb], 0.0);
        let (v, b) = (&st.velocity, &st.boundary);
        velocity_cross_backward(disc, v, b, nu, &w, &mut gv, &mut gb, &mut gn);
        ck.check("velocity_cross", "velocity", &flatten(v, dim), &flatten(&gv, dim), |x| {
            weighted(&w, &velocity_cross(disc, &fu(x), b, nu))
        });
        ck.check("velocity_cross", "boundary", &flatten(b, dim), &flatten(&gb, dim), |x| {
            weighted(&w, &velocity_cross(disc, v, &fu(x), nu))
        });
        ck.check("velocity_cross", "viscosity", &[nu], &[gn], |x| weighted(&w, &velocity_cross(disc, v, b, x[0])));
    }

    // Predictor solve (one component-wise BiCGStab per axis against the shared matrix).
    {
        let kind = SolverKind::BiCgStab(cfg.velocity_precond);
        let opts = check_options();
        let w = ck.vec3(n, dim);
        let c = &rec.predictor;
        let solve_all = |m: &CsrMatrix, rhs: &[Vec3]| -> Vec<Vec3> {
            let mut u = vec![ZERO3; n];
            for comp in 0..dim {
                let b: Vec<f64> = rhs.iter().map(|v| v[comp]).collect();
                let (x, _) = solve(m, &b, &vec![0.0; n], kind, &opts);
                for (dst, v) in u.iter_mut().zip(x) {
                    dst[comp] = v;
                }
            }
            u
        };
        let u = solve_all(c, &rec.rhs_full);
        let mut g_c = vec![0.0; c.nnz()];
        let mut g_r = vec![ZERO3; n];
        for comp in 0..dim {
            let gx: Vec<f64> = w.iter().map(|v| v[comp]).collect();
            let (gb, _) = transpose_solve(c, &gx, kind, &opts);
            let xc: Vec<f64> = u.iter().map(|v| v[comp]).collect();
            accumulate_matrix_grad(&mut g_c, &gb, &xc, c);
            for (dst, v) in g_r.iter_mut().zip(gb) {
                dst[comp] = v;
            }
        }
        ck.check("predictor_solve", "matrix", c.values(), &g_c, |x| weighted(&w, &solve_all(&c.with_values(x.to_vec()), &rec.rhs_full)));
        ck.check("predictor_solve", "rhs", &flatten(&rec.rhs_full, dim), &flatten(&g_r, dim), |x| weighted(&w, &solve_all(c, &fu(x))));
    }

    // h and its divergence.
    {
        let corr = &rec.correctors[0];
        let (wh, wd) = (ck.vec3(n, dim), ck.scalars(n));
        let c = &rec.predictor;
        let loss = |m: &CsrMatrix, rhs: &[Vec3], u: &[Vec3], b: &[Vec3]| {
            let h = compute_h(m, slots, rhs, u);
            weighted(&wh, &h) + dot_slices(&wd, &divergence(d, &h, b))
        };
        let mut gh = wh.clone();
        let mut gb = vec![ZERO3; nb];
        divergence_backward(d, &wd, &mut gh, &mut gb);
        let (mut g_rhs, mut g_u, mut g_c) = (vec![ZERO3; n], vec![ZERO3; n], vec![0.0; c.nnz()]);
        compute_h_backward(c, slots, &corr.input, &corr.h, &gh, &mut g_rhs, &mut g_u, &mut g_c);
        let (rhs, u, b) = (&rec.rhs_full, &corr.input, &rec.boundary);
        ck.check("pressure_rhs", "matrix", c.values(), &g_c, |x| loss(&c.with_values(x.to_vec()), rhs, u, b));
        ck.check("pressure_rhs", "rhs", &flatten(rhs, dim), &flatten(&g_rhs, dim), |x| loss(c, &fu(x), u, b));
        ck.check("pressure_rhs", "velocity", &flatten(u, dim), &flatten(&g_u, dim), |x| loss(c, rhs, &fu(x), b));
        ck.check("pressure_rhs", "boundary", &flatten(b, dim), &flatten(&gb, dim), |x| loss(c, rhs, u, &fu(x)));
    }

    // Pressure matrix assembly and singular solve.
    {
        let kind = SolverKind::Cg(Nullspace::Constant);
        let opts = check_options().with_absolute(1e-13);
        let w = ck.scalars(n);
        let b0 = rec.correctors[0].divergence.clone();
        let loss = |a: &[f64], b: &[f64]| {
            let pm = assemble_pressure(d, a).expect("positive diagonal");
            let (p, _) = solve(&pm, b, &vec![0.0; n], kind, &opts);
            dot_slices(&w, &p)
        };
        let pm = assemble_pressure(d, &a_diag)?;
        let (p, _) = solve(&pm, &b0, &vec![0.0; n], kind, &opts);
        let (gb, _) = transpose_solve(&pm, &w, kind, &opts);
        let mut g_pm = vec![0.0; pm.nnz()];
        accumulate_matrix_grad(&mut g_pm, &gb, &p, &pm);
        let mut g_a = vec![0.0; n];
        assemble_pressure_backward(d, &a_diag, &g_pm, &mut g_a);
        ck.check("pressure_solve", "diagonal", &a_diag, &g_a, |x| loss(x, &b0));
        ck.check("pressure_solve", "rhs", &b0, &gb, |x| loss(&a_diag, x));
    }

    let p0 = rec.correctors[0].pressures.last().unwrap().clone();
    if cross {
        let w = ck.scalars(n);
        let (mut g_p, mut g_a) = (vec![0.0; n], vec![0.0; n]);
        pressure_cross_backward(disc, &a_diag, &p0, &w, &mut g_p, &mut g_a);
        ck.check("pressure_cross", "diagonal", &a_diag, &g_a, |x| dot_slices(&w, &pressure_cross(disc, x, &p0)));
        ck.check("pressure_cross", "pressure", &p0, &g_p, |x| dot_slices(&w, &pressure_cross(disc, &a_diag, x)));
    }

    {
        let h = &rec.correctors[0].h;
        let w = ck.vec3(n, dim);
        let (mut g_h, mut g_a, mut g_p) = (vec![ZERO3; n], vec![0.0; n], vec![0.0; n]);
        correct_velocity_backward(d, &a_diag, &p0, &w, &mut g_h, &mut g_a, &mut g_p);
        ck.check("correct_velocity", "h", &flatten(h, dim), &flatten(&g_h, dim), |x| {
            weighted(&w, &correct_velocity(d, &fu(x), &a_diag, &p0))
        });
        ck.check("correct_velocity", "diagonal", &a_diag, &g_a, |x| weighted(&w, &correct_velocity(d, h, x, &p0)));
        ck.check("correct_velocity", "pressure", &p0, &g_p, |x| weighted(&w, &correct_velocity(d, h, &a_diag, x)));
    }

    // Composite step.
    {
        let wu = ck.vec3(n, dim);
        let wp = ck.scalars(n);
        let loss = |s: &FlowState, src: &[Vec3], nu: f64| {
            let mut c = cfg.clone();
            c.viscosity = nu;
            let out = piso_step(disc, s, src, &c).expect("forward step");
            weighted(&wu, &out.state.velocity) + dot_slices(&wp, &out.state.pressure)
        };
        let seed = StateGrad { velocity: wu.clone(), pressure: wp.clone(), ..StateGrad::zeros(d) };
        let g = backward_step(disc, &rec, &seed, GradientPath::Full, cfg)?;
        let with = |f: &dyn Fn(&mut FlowState)| {
            let mut s = st.clone();
            f(&mut s);
            s
        };
        ck.check("step", "velocity", &flatten(&st.velocity, dim), &flatten(&g.velocity, dim), |x| {
            loss(&with(&|s| s.velocity = fu(x)), &case.source, nu)
        });
        ck.check("step", "boundary", &flatten(&st.boundary, dim), &flatten(&g.boundary, dim), |x| {
            loss(&with(&|s| s.boundary = fu(x)), &case.source, nu)
        });
        ck.check("step", "source", &flatten(&case.source, dim), &flatten(&g.source, dim), |x| loss(st, &fu(x), nu));
        ck.check("step", "viscosity", &[nu], &[g.viscosity], |x| loss(st, &case.source, x[0]));
    }

    // The old pressure only enters the first cross-term pass, and its influence decays
    // geometrically over further passes; a single pass keeps it above finite-difference noise.
    if cross {
        let mut c1 = cfg.clone().recording(true);
        c1.non_orthogonal_correctors = Some(0);
        let wu = ck.vec3(n, dim);
        let wp = ck.scalars(n);
        let rec1 = piso_step(disc, st, &case.source, &c1)?.record.expect("recorded");
        let seed = StateGrad { velocity: wu.clone(), pressure: wp.clone(), ..StateGrad::zeros(d) };
        let g = backward_step(disc, &rec1, &seed, GradientPath::Full, &c1)?;
        ck.check("step_single_pass", "pressure", &st.pressure, &g.pressure, |x| {
            let s = FlowState { pressure: x.to_vec(), ..st.clone() };
            let out = piso_step(disc, &s, &case.source, &c1).expect("forward step");
            weighted(&wu, &out.state.velocity) + dot_slices(&wp, &out.state.pressure)
        });
    }

    for steps in [1usize, 3] {
        check_rollout(ck, case, steps)?;
    }
    Ok(())
}

/// Scalar-parameter derivatives of a rollout loss: initial velocity scale, viscosity,
/// boundary velocity scale and source scale.
fn check_rollout(ck: &mut Checker, case: &CheckCase, steps: usize) -> Result<()> {
    let disc = &case.disc;
    let d = disc.domain();
    let dim = d.dim();
    let cfg = &case.config;
    let w = ck.vec3(d.n_cells(), dim);
    let run = |vs: f64, nu: f64, bs: f64, ss: f64| -> f64 {
        let mut s = case.state.clone();
        s.velocity.iter_mut().for_each(|v| *v = v.map(|x| vs * x));
        s.boundary.iter_mut().for_each(|v| *v = v.map(|x| bs * x));
        let src: Vec<Vec3> = case.source.iter().map(|v| v.map(|x| ss * x)).collect();
        let mut c = cfg.clone();
        c.viscosity = nu;
        let ro = rollout(disc, &s, &src, &c, steps).expect("forward rollout");
        weighted(&w, &ro.state.velocity)
    };
    let ro = rollout(disc, &case.state, &case.source, cfg, steps)?;
    let seed = StateGrad::from_velocity(d, w.clone());
    let g = backward_rollout(disc, &ro, &seed, GradientPath::Full, cfg)?;
    let dot3 = |a: &[Vec3], b: &[Vec3]| weighted(a, b);
    let stage = format!("rollout{steps}");
    let nu = cfg.viscosity;
    ck.check(&stage, "velocity_scale", &[1.0], &[dot3(&g.velocity, &case.state.velocity)], |x| run(x[0], nu, 1.0, 1.0));
    ck.check(&stage, "viscosity", &[nu], &[g.viscosity], |x| run(1.0, x[0], 1.0, 1.0));
    ck.check(&stage, "boundary_scale", &[1.0], &[dot3(&g.boundary, &case.state.boundary)], |x| run(1.0, nu, x[0], 1.0));
    ck.check(&stage, "source_scale", &[1.0], &[dot3(&g.source, &case.source)], |x| run(1.0, nu, 1.0, x[0]));
    Ok(())
}

/// Full suite over [`standard_cases`].
pub fn gradcheck_suite(seed: u64, max_samples: usize) -> Result<GradCheckReport> {
    let mut ck = Checker::new(seed ^ 0x9e37_79b9, max_samples);
    for case in standard_cases(seed)? {
        check_case(&mut ck, &case)?;
    }
    Ok(ck.report)
}
