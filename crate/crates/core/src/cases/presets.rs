//! Ready-made configurations of the benchmark cases and optimization tasks.

use super::config::{
    CaseConfig, Duration, InitialCondition, MeshSpec, OptimizationSpec, Parameter, ParameterSpec, SourceSpec, StatsPlan, StepSize,
    TimeControl,
};
use crate::adjoint::GradientPath;
use crate::mesh::Side;
use crate::piso::channel::centerline_reynolds;

/// Periodic-in-x unit channel driven by a uniform source `g`, run to steady state.
pub fn poiseuille_case(n: usize, theta_max: f64, g: f64, nu: f64) -> CaseConfig {
    let time = TimeControl { step: StepSize::Fixed(1.0), duration: Duration::Steady { tol: 1e-9, max_steps: 200 } };
    let mut c = CaseConfig::new(format!("poiseuille{n}"), MeshSpec::Poiseuille { n, theta_max }, nu, time);
    c.source = SourceSpec::Uniform([g, 0.0, 0.0]);
    c
}

/// Unit cavity with the lid on the upper side moving at speed one, `ν = 1/Re`.
pub fn cavity_case(n: usize, re: f64, horizon: f64) -> CaseConfig {
    let time = TimeControl { step: StepSize::Cfl { target: 0.8, max_dt: 0.05 }, duration: Duration::Horizon(horizon) };
    let mesh = MeshSpec::Cavity { n, size: 1.0, lid_side: Side::upper(1), lid_velocity: 1.0 };
    CaseConfig::new(format!("cavity{n}"), mesh, 1.0 / re, time)
}

/// Closed box at rest; every step must reproduce the initial state.
pub fn closed_box_case(n: usize, steps: usize) -> CaseConfig {
    let time = TimeControl { step: StepSize::Fixed(0.1), duration: Duration::Steps(steps) };
    let mesh = MeshSpec::Box { dim: 2, resolution: [n, n, 1], size: [1.0, 1.0, 1.0], periodic: [false; 3] };
    CaseConfig::new("closed_box", mesh, 0.01, time)
}

/// `[2π, 2, π]δ` channel with wall refinement, Reichardt start at `re_tau` and dynamic wall
/// forcing.
pub fn channel_case(resolution: [usize; 3], re_tau: f64, steps: usize, seed: u64) -> CaseConfig {
    let delta = 1.0;
    let pi = std::f64::consts::PI;
    let time = TimeControl { step: StepSize::Cfl { target: 0.8, max_dt: 0.05 }, duration: Duration::Steps(steps) };
    let mesh = MeshSpec::Channel { dim: 3, resolution, size: [2.0 * pi * delta, 2.0 * delta, pi * delta], base: 1.095 };
    let mut c = CaseConfig::new("channel", mesh, delta / centerline_reynolds(re_tau), time);
    c.delta = delta;
    c.source = SourceSpec::WallForcing;
    c.initial = InitialCondition::Reichardt { re_tau, perturbation: 0.1, seed };
    c.seed = seed;
    c.stats = Some(StatsPlan::default());
    c
}

/// Width and height of the scaling-task box in cells; the cell size is one.
pub const SCALING_RESOLUTION: [usize; 2] = [18, 16];
pub const SCALING_VISCOSITY: f64 = 0.05;
pub const SCALING_DT: f64 = 0.5;
pub const SCALING_INITIAL: f64 = 0.5;
pub const SCALING_TARGET: f64 = 1.0;

/// Periodic box with a Gaussian x-velocity bump whose scale is recovered from the state
/// after `steps` steps.
pub fn scaling_task(resolution: [usize; 2], steps: usize, learning_rate: f64, path: GradientPath) -> CaseConfig {
    let [nx, ny] = resolution;
    let time = TimeControl { step: StepSize::Fixed(SCALING_DT), duration: Duration::Steps(steps) };
    let mesh = MeshSpec::Box { dim: 2, resolution: [nx, ny, 1], size: [nx as f64, ny as f64, 1.0], periodic: [true, true, false] };
    let mut c = CaseConfig::new("scaling", mesh, SCALING_VISCOSITY, time);
    c.initial = InitialCondition::Gaussian { amplitude: 1.0, sigma: None };
    c.optimization = Some(OptimizationSpec {
        parameters: vec![ParameterSpec {
            parameter: Parameter::InitialScale,
            initial: SCALING_INITIAL,
            target: SCALING_TARGET,
            learning_rate,
        }],
        iterations: 60,
        path,
        weight_decay: 0.0,
        loss_scale: 1.0,
        stop_loss: None,
    });
    c
}

/// 32² cavity with the lid on the lower side; ten time units at Courant number 8 based on
/// the faster of the initial and target lid speeds.
fn cavity_task(name: &str, lid: f64, nu: f64, parameters: Vec<ParameterSpec>, loss_scale: f64) -> CaseConfig {
    let time = TimeControl { step: StepSize::Cfl { target: 8.0, max_dt: 10.0 }, duration: Duration::Horizon(10.0) };
    let mesh = MeshSpec::Cavity { n: 32, size: 1.0, lid_side: Side::lower(1), lid_velocity: lid };
    let mut c = CaseConfig::new(name, mesh, nu, time);
    c.optimization =
        Some(OptimizationSpec { parameters, iterations: 100, path: GradientPath::Full, weight_decay: 0.0, loss_scale, stop_loss: None });
    c
}

pub const LID_LOSS_SCALE: f64 = 50.0;
pub const VISCOSITY_LOSS_SCALE: f64 = 4.0;

/// Lid speed 1.0 → 0.2 at `ν = 0.005`, learning rate 6e-2.
pub fn lid_task() -> CaseConfig {
    let p = ParameterSpec { parameter: Parameter::LidVelocity, initial: 1.0, target: 0.2, learning_rate: 6e-2 };
    cavity_task("lid", 1.0, 0.005, vec![p], LID_LOSS_SCALE)
}

/// Viscosity 0.005 → 0.001 with lid speed one, learning rate 2e-5.
pub fn viscosity_task() -> CaseConfig {
    let p = ParameterSpec { parameter: Parameter::Viscosity, initial: 0.005, target: 0.001, learning_rate: 2e-5 };
    cavity_task("viscosity", 1.0, 0.005, vec![p], VISCOSITY_LOSS_SCALE)
}

pub const JOINT_LOSS_SCALE: f64 = 10.0;

/// Lid speed and viscosity together from (1.0, 0.005) towards (0.2, 0.001), with a weight
/// decay penalty on both. The viscosity rate is lowered so ν stays positive while the lid
/// catches up; the solution found depends on this ratio.
pub fn joint_task(weight_decay: f64) -> CaseConfig {
    let params = vec![
        ParameterSpec { parameter: Parameter::LidVelocity, initial: 1.0, target: 0.2, learning_rate: 6e-2 },
        ParameterSpec { parameter: Parameter::Viscosity, initial: 0.005, target: 0.001, learning_rate: 1e-5 },
    ];
    let mut c = cavity_task("joint", 1.0, 0.005, params, JOINT_LOSS_SCALE);
    if let Some(o) = c.optimization.as_mut() {
        o.weight_decay = weight_decay;
    }
    c
}
