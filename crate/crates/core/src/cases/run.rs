use super::config::{uniform_source, CaseConfig, Duration, InitialCondition, MeshSpec, SourceSpec, StepSize};
use crate::error::{Error, Result};
use crate::math::{mat_vec, Vec3, ZERO3};
use crate::mesh::Domain;
use crate::piso::channel::{dynamic_wall_forcing, reichardt_init};
use crate::piso::{adaptive_dt, advective_outflow_update, piso_step, Discretization, FlowState};
use crate::stats::{ChannelStatistics, StatsProfile};

/// Closed-form plane Poiseuille velocity `G / (2ν) · y (1 − y)` on the unit channel.
pub fn poiseuille_analytic(y: f64, g: f64, nu: f64) -> f64 {
    g / (2.0 * nu) * y * (1.0 - y)
}

/// Velocity field of an initial condition (before any scaling parameter).
pub fn initial_velocity(config: &CaseConfig, d: &Domain) -> Result<Vec<Vec3>> {
    match config.initial {
        InitialCondition::Rest => Ok(vec![ZERO3; d.n_cells()]),
        InitialCondition::Gaussian { amplitude, sigma } => {
            let (lo, hi) = bounding_box(d);
            let sigma = sigma.unwrap_or((hi[0] - lo[0]) / 8.0);
            if !(sigma > 0.0) {
                return Err(Error::InvalidInput(format!("gaussian width must be positive, got {sigma}")));
            }
            let c: Vec<f64> = (0..3).map(|i| 0.5 * (lo[i] + hi[i])).collect();
            Ok(d.centers()
                .iter()
                .map(|x| {
                    let r2: f64 = (0..d.dim()).map(|i| (x[i] - c[i]).powi(2)).sum();
                    [amplitude * (-r2 / (2.0 * sigma * sigma)).exp(), 0.0, 0.0]
                })
                .collect())
        }
        InitialCondition::Reichardt { re_tau, perturbation, seed } => {
            Ok(reichardt_init(d, config.delta, re_tau, perturbation, seed)?.velocity)
        }
    }
}

/// Vertex bounding box over all blocks.
pub(crate) fn bounding_box(d: &Domain) -> (Vec3, Vec3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for b in d.blocks() {
        for v in &b.spec.vertices {
            for i in 0..3 {
                lo[i] = lo[i].min(v[i]);
                hi[i] = hi[i].max(v[i]);
            }
        }
    }
    (lo, hi)
}

/// Courant-limited step that also accounts for boundary-face velocities, so a cavity at rest
/// still gets a step bounded by its lid speed.
pub fn cfl_dt(d: &Domain, velocity: &[Vec3], boundary: &[Vec3], cfl: f64, max_dt: f64) -> f64 {
    let dim = d.dim();
    let peak = d
        .boundary_faces()
        .iter()
        .zip(boundary)
        .map(|(f, u)| mat_vec(&f.metrics.t, *u)[..dim].iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let dt = adaptive_dt(d, velocity, cfl, max_dt);
    if peak > 0.0 {
        dt.min(cfl / peak)
    } else {
        dt
    }
}

#[derive(Clone, Debug)]
pub struct CaseOutput {
    pub domain: Domain,
    pub state: FlowState,
    pub steps: usize,
    /// Per-step largest cell divergence after the final corrector.
    pub divergence: Vec<f64>,
    /// Forward pressure tolerance the divergence is measured against.
    pub tolerance: f64,
    /// Steady runs: whether the change criterion was met before `max_steps`.
    pub converged: bool,
    pub statistics: Option<ChannelStatistics>,
    pub profile: Option<StatsProfile>,
}

impl CaseOutput {
    pub fn max_divergence(&self) -> f64 {
        self.divergence.iter().copied().fold(0.0, f64::max)
    }
}

pub fn run_case(config: &CaseConfig) -> Result<CaseOutput> {
    run_case_with(config, |_, _| Ok(()))
}

/// Runs a case, calling `observer(step, state)` for every requested snapshot and for the
/// final state. Step `0` is the initial state.
pub fn run_case_with(config: &CaseConfig, observer: impl FnMut(usize, &FlowState) -> Result<()>) -> Result<CaseOutput> {
    config.validate()?;
    let domain = config.mesh.build()?;
    let velocity = initial_velocity(config, &domain)?;
    run_case_from(config, domain, velocity, observer)
}

/// Same as [`run_case_with`] but starts from `velocity` on an already built `domain`, which
/// must come from `config.mesh`.
pub fn run_case_from(
    config: &CaseConfig,
    domain: Domain,
    velocity: Vec<Vec3>,
    mut observer: impl FnMut(usize, &FlowState) -> Result<()>,
) -> Result<CaseOutput> {
    config.validate()?;
    if velocity.len() != domain.n_cells() {
        return Err(Error::InvalidInput(format!("initial velocity has {} cells, domain has {}", velocity.len(), domain.n_cells())));
    }
    let disc = Discretization::new(domain);
    let d = disc.domain();
    let cfg = config.step_config();
    let nu = config.viscosity;

    let mut state = FlowState::at_rest(d, 0.0);
    state.velocity = velocity;
    let fixed_source = uniform_source(d, &config.source);
    let mut statistics = config.stats.map(|p| ChannelStatistics::new(d, p.max_order)).transpose()?;

    let (max_steps, horizon) = match config.time.duration {
        Duration::Steps(n) => (n, f64::INFINITY),
        Duration::Horizon(t) => (usize::MAX, t),
        Duration::Steady { max_steps, .. } => (max_steps, f64::INFINITY),
    };
    let mut divergence = Vec::new();
    let mut converged = false;
    let mut step = 0;
    if config.dump_every.is_some() {
        observer(0, &state)?;
    }
    while step < max_steps && state.time < horizon * (1.0 - 1e-12) {
        let dt = match config.time.step {
            StepSize::Fixed(dt) => dt,
            StepSize::Cfl { target, max_dt } => cfl_dt(d, &state.velocity, &state.boundary, target, max_dt),
        };
        state.dt = dt.min(horizon - state.time);
        if d.has_outflow() {
            advective_outflow_update(d, &mut state).map_err(|e| e.at_step(step))?;
        }
        let source = match config.source {
            SourceSpec::WallForcing => {
                let f = dynamic_wall_forcing(d, &state.velocity, &state.boundary, nu)?;
                vec![[f.source, 0.0, 0.0]; d.n_cells()]
            }
            _ => fixed_source.clone(),
        };
        let out = piso_step(&disc, &state, &source, &cfg).map_err(|e| e.at_step(step))?;
        divergence.push(out.diagnostics.max_divergence);
        let change = out.state.velocity.iter().zip(&state.velocity).flat_map(|(a, b)| (0..3).map(move |i| (a[i] - b[i]).abs()));
        let change = change.fold(0.0, f64::max);
        state = out.state;
        step += 1;
        if !state.velocity.iter().flatten().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput("velocity became non-finite".into()).at_step(step - 1));
        }
        if let (Some(acc), Some(plan)) = (statistics.as_mut(), config.stats) {
            if step >= plan.start && (step - plan.start) % plan.interval == 0 {
                acc.record(&state.velocity, &state.pressure);
            }
        }
        if let Some(every) = config.dump_every {
            if step % every == 0 {
                observer(step, &state)?;
            }
        }
        if let Duration::Steady { tol, .. } = config.time.duration {
            let peak = state.velocity.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
            if change <= tol * peak.max(f64::MIN_POSITIVE) {
                converged = true;
                break;
            }
        }
    }
    if config.dump_every.is_none_or(|every| step % every != 0) {
        observer(step, &state)?;
    }
    if matches!(config.time.duration, Duration::Steps(_) | Duration::Horizon(_)) {
        converged = true;
    }
    let profile = match &statistics {
        Some(acc) if acc.frames() > 0 => Some(acc.profile(nu, [0.0, 0.0])?),
        _ => None,
    };
    Ok(CaseOutput {
        domain: disc.domain().clone(),
        state,
        steps: step,
        divergence,
        tolerance: cfg.tolerance(),
        converged,
        statistics,
        profile,
    })
}

/// Largest x-velocity of a Poiseuille run compared with the analytic peak `G / 8ν`.
pub fn poiseuille_peak_error(config: &CaseConfig, output: &CaseOutput) -> Result<f64> {
    let g = match (&config.mesh, &config.source) {
        (MeshSpec::Poiseuille { .. }, SourceSpec::Uniform(s)) => s[0],
        _ => return Err(Error::InvalidInput("not a Poiseuille case".into())),
    };
    let exact = poiseuille_analytic(0.5, g, config.viscosity);
    let peak = output.state.velocity.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
    Ok((peak - exact).abs() / exact)
}

/// Largest deviation from the analytic profile sampled at cell centers, relative to the
/// analytic peak `G / 8ν`.
pub fn poiseuille_profile_error(config: &CaseConfig, output: &CaseOutput) -> Result<f64> {
    let g = match (&config.mesh, &config.source) {
        (MeshSpec::Poiseuille { .. }, SourceSpec::Uniform(s)) => s[0],
        _ => return Err(Error::InvalidInput("not a Poiseuille case".into())),
    };
    let nu = config.viscosity;
    let exact = poiseuille_analytic(0.5, g, nu);
    let worst = output
        .domain
        .centers()
        .iter()
        .zip(&output.state.velocity)
        .map(|(x, u)| (u[0] - poiseuille_analytic(x[1], g, nu)).abs())
        .fold(0.0, f64::max);
    Ok(worst / exact)
}
