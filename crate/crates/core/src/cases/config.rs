use std::fmt;
use std::str::FromStr;

use crate::adjoint::GradientPath;
use crate::error::{Error, Result};
use crate::linalg::Precond;
use crate::math::{Vec3, ZERO3};
use crate::mesh::generate::{self, BfsParams, VortexStreetParams};
use crate::mesh::{Domain, Side};
use crate::piso::{Precision, StepConfig};

/// Geometry and resolution of a benchmark case.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSpec {
    Cavity {
        n: usize,
        size: f64,
        lid_side: Side,
        lid_velocity: f64,
    },
    /// Unit channel periodic in x; `theta_max > 0` applies the rotational distortion.
    Poiseuille {
        n: usize,
        theta_max: f64,
    },
    Box {
        dim: usize,
        resolution: [usize; 3],
        size: Vec3,
        periodic: [bool; 3],
    },
    Channel {
        dim: usize,
        resolution: [usize; 3],
        size: Vec3,
        base: f64,
    },
    BackwardStep(BfsParams),
    VortexStreet(VortexStreetParams),
}

impl MeshSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MeshSpec::Cavity { .. } => "cavity",
            MeshSpec::Poiseuille { .. } => "poiseuille",
            MeshSpec::Box { .. } => "box",
            MeshSpec::Channel { .. } => "channel",
            MeshSpec::BackwardStep(_) => "bfs",
            MeshSpec::VortexStreet(_) => "vortex_street",
        }
    }

    pub fn build(&self) -> Result<Domain> {
        match self {
            MeshSpec::Cavity { n, size, lid_side, lid_velocity } => generate::cavity(*n, *size, *lid_side, *lid_velocity),
            MeshSpec::Poiseuille { n, theta_max } => generate::poiseuille(*n, *theta_max),
            MeshSpec::Box { dim, resolution, size, periodic } => generate::periodic_box(*dim, *resolution, *size, *periodic),
            MeshSpec::Channel { dim, resolution, size, base } => generate::channel(*dim, *resolution, *size, *base),
            MeshSpec::BackwardStep(p) => generate::backward_facing_step(p),
            MeshSpec::VortexStreet(p) => generate::vortex_street(p),
        }
    }

    /// Lid side of a cavity; `None` for other geometries.
    pub fn lid(&self) -> Option<Side> {
        match self {
            MeshSpec::Cavity { lid_side, .. } => Some(*lid_side),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SourceSpec {
    None,
    /// Constant body force in every cell.
    Uniform(Vec3),
    /// Streamwise force re-balanced every step against the wall drag (channels only).
    WallForcing,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialCondition {
    Rest,
    /// `amplitude · exp(−|x − c|² / 2σ²)` in the x-velocity, centered in the bounding box.
    /// `sigma = None` uses 1/8 of the domain width.
    Gaussian {
        amplitude: f64,
        sigma: Option<f64>,
    },
    /// Reichardt mean profile plus a divergence-free perturbation (channels only).
    Reichardt {
        re_tau: f64,
        perturbation: f64,
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    /// Largest step with Courant number `target`, capped at `max_dt`.
    Cfl {
        target: f64,
        max_dt: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Duration {
    Steps(usize),
    /// Simulated time; the last step is shortened to land on it.
    Horizon(f64),
    /// Stops once the largest velocity change of a step is below `tol` times the largest
    /// velocity, or after `max_steps`.
    Steady {
        tol: f64,
        max_steps: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeControl {
    pub step: StepSize,
    pub duration: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSettings {
    pub correctors: usize,
    pub non_orthogonal_correctors: Option<usize>,
    pub tolerance: Option<f64>,
    pub adjoint_tolerance: Option<f64>,
    pub max_iter: usize,
    pub velocity_precond: Precond,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            correctors: 2,
            non_orthogonal_correctors: None,
            tolerance: None,
            adjoint_tolerance: None,
            max_iter: 5000,
            velocity_precond: Precond::Fallback,
        }
    }
}

/// Channel statistics collected from step `start` every `interval` steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StatsPlan {
    pub start: usize,
    pub interval: usize,
    pub max_order: usize,
}

impl Default for StatsPlan {
    fn default() -> Self {
        StatsPlan { start: 0, interval: 1, max_order: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Parameter {
    /// Factor applied to the initial velocity field.
    InitialScale,
    /// x-velocity of every face on the cavity lid.
    LidVelocity,
    Viscosity,
    /// Per-cell body force, initialized and targeted uniformly in x.
    Source,
}

impl Parameter {
    pub const ALL: [Parameter; 4] = [Parameter::InitialScale, Parameter::LidVelocity, Parameter::Viscosity, Parameter::Source];

    pub fn name(self) -> &'static str {
        match self {
            Parameter::InitialScale => "initial_scale",
            Parameter::LidVelocity => "lid_velocity",
            Parameter::Viscosity => "viscosity",
            Parameter::Source => "source",
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSpec {
    pub parameter: Parameter,
    pub initial: f64,
    /// Value used to generate the reference rollout.
    pub target: f64,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationSpec {
    pub parameters: Vec<ParameterSpec>,
    pub iterations: usize,
    pub path: GradientPath,
    /// `λ_WD` of the `λ_WD ‖θ‖²` penalty.
    pub weight_decay: f64,
    /// Factor on the volume-integrated squared velocity error of the final state.
    pub loss_scale: f64,
    /// Stops early once the loss falls below this value.
    pub stop_loss: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CaseConfig {
    pub name: String,
    pub mesh: MeshSpec,
    pub viscosity: f64,
    pub source: SourceSpec,
    /// Channel half height.
    pub delta: f64,
    pub initial: InitialCondition,
    pub time: TimeControl,
    pub solver: SolverSettings,
    pub precision: Precision,
    pub seed: u64,
    pub stats: Option<StatsPlan>,
    /// Field snapshots every this many steps, in addition to the final state.
    pub dump_every: Option<usize>,
    pub optimization: Option<OptimizationSpec>,
}

impl CaseConfig {
    pub fn new(name: impl Into<String>, mesh: MeshSpec, viscosity: f64, time: TimeControl) -> Self {
        CaseConfig {
            name: name.into(),
            mesh,
            viscosity,
            source: SourceSpec::None,
            delta: 1.0,
            initial: InitialCondition::Rest,
            time,
            solver: SolverSettings::default(),
            precision: Precision::Double,
            seed: 0,
            stats: None,
            dump_every: None,
            optimization: None,
        }
    }

    pub fn step_config(&self) -> StepConfig {
        let s = &self.solver;
        StepConfig {
            correctors: s.correctors,
            non_orthogonal_correctors: s.non_orthogonal_correctors,
            precision: self.precision,
            tolerance: s.tolerance,
            adjoint_tolerance: s.adjoint_tolerance,
            max_iter: s.max_iter,
            velocity_precond: s.velocity_precond,
            ..StepConfig::new(self.viscosity)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.viscosity >= 0.0 && self.viscosity.is_finite()) {
            return bad(format!("viscosity must be finite and nonnegative, got {}", self.viscosity));
        }
        if !(self.delta > 0.0) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        match self.time.step {
            StepSize::Fixed(dt) if !(dt > 0.0 && dt.is_finite()) => return bad(format!("dt must be positive, got {dt}")),
            StepSize::Cfl { target, max_dt } if !(target > 0.0 && max_dt > 0.0) => {
                return bad("cfl target and max_dt must be positive".into())
            }
            _ => {}
        }
        match self.time.duration {
            Duration::Steps(0) => return bad("step count must be positive".into()),
            Duration::Horizon(t) if !(t > 0.0) => return bad(format!("horizon must be positive, got {t}")),
            Duration::Steady { tol, max_steps } if !(tol > 0.0) || max_steps == 0 => {
                return bad("steady tolerance and max_steps must be positive".into())
            }
            _ => {}
        }
        if self.solver.correctors == 0 {
            return bad("at least one pressure corrector is required".into());
        }
        let channel = matches!(self.mesh, MeshSpec::Channel { .. });
        if matches!(self.source, SourceSpec::WallForcing) && !channel {
            return bad("wall forcing requires a channel mesh".into());
        }
        if matches!(self.initial, InitialCondition::Reichardt { .. }) && !channel {
            return bad("Reichardt initialization requires a channel mesh".into());
        }
        if let Some(s) = &self.stats {
            if !channel {
                return bad("statistics collection requires a channel mesh".into());
            }
            if s.interval == 0 || !(2..=16).contains(&s.max_order) {
                return bad("stats interval must be positive and max_order in 2..=16".into());
            }
        }
        if self.dump_every == Some(0) {
            return bad("dump_every must be positive".into());
        }
        if let Some(o) = &self.optimization {
            self.validate_optimization(o)?;
        }
        Ok(())
    }

    fn validate_optimization(&self, o: &OptimizationSpec) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if o.parameters.is_empty() {
            return bad("optimization needs at least one parameter".into());
        }
        if o.iterations == 0 || !(o.loss_scale > 0.0) || !(o.weight_decay >= 0.0) {
            return bad("iterations and loss_scale must be positive, weight_decay nonnegative".into());
        }
        if matches!(self.source, SourceSpec::WallForcing) {
            return bad("optimization does not support dynamic wall forcing".into());
        }
        if matches!(self.time.duration, Duration::Steady { .. }) {
            return bad("optimization needs a fixed step count or horizon".into());
        }
        for (i, p) in o.parameters.iter().enumerate() {
            if o.parameters[..i].iter().any(|q| q.parameter == p.parameter) {
                return bad(format!("parameter `{}` listed twice", p.parameter));
            }
            if !(p.learning_rate > 0.0) || !p.initial.is_finite() || !p.target.is_finite() {
                return bad(format!("parameter `{}` needs finite values and a positive learning rate", p.parameter));
            }
            match p.parameter {
                Parameter::LidVelocity if self.mesh.lid().is_none() => return bad("lid_velocity requires a cavity mesh".into()),
                Parameter::InitialScale if self.initial == InitialCondition::Rest => {
                    return bad("initial_scale requires a nonzero initial condition".into())
                }
                Parameter::Viscosity if p.initial < 0.0 || p.target < 0.0 => return bad("viscosity values must be nonnegative".into()),
                _ => {}
            }
        }
        Ok(())
    }
}

/// Uniform source field from a spec (empty for none or dynamic forcing).
pub(crate) fn uniform_source(d: &Domain, spec: &SourceSpec) -> Vec<Vec3> {
    match spec {
        SourceSpec::Uniform(s) if *s != ZERO3 => vec![*s; d.n_cells()],
        _ => Vec::new(),
    }
}
