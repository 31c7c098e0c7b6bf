use super::step::{backward_step, GradientPath, StateGrad};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::piso::{piso_step, Discretization, FlowState, StepConfig, StepDiagnostics, StepRecord};

/// Forward rollout with every step recorded for reverse mode.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub initial: FlowState,
    pub state: FlowState,
    pub tape: Vec<StepRecord>,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// Advances `steps` steps with a constant source, recording each step.
pub fn rollout(disc: &Discretization, state: &FlowState, source: &[Vec3], cfg: &StepConfig, steps: usize) -> Result<Rollout> {
    let cfg = cfg.clone().recording(true);
    let mut cur = state.clone();
    let mut tape = Vec::with_capacity(steps);
    let mut diagnostics = Vec::with_capacity(steps);
    for i in 0..steps {
        let out = piso_step(disc, &cur, source, &cfg).map_err(|e| e.at_step(i))?;
        tape.push(out.record.expect("recording enabled"));
        diagnostics.push(out.diagnostics);
        cur = out.state;
    }
    Ok(Rollout { initial: state.clone(), state: cur, tape, diagnostics })
}

/// Reverse pass over a rollout. `grad` seeds the final velocity and pressure; the result
/// holds the initial-state cotangents and boundary, source and viscosity cotangents summed
/// over steps.
pub fn backward_rollout(disc: &Discretization, ro: &Rollout, grad: &StateGrad, path: GradientPath, cfg: &StepConfig) -> Result<StateGrad> {
    let d = disc.domain();
    if grad.velocity.len() != d.n_cells() || grad.pressure.len() != d.n_cells() {
        return Err(Error::InvalidInput("cotangent shape does not match the domain".into()));
    }
    let mut params = StateGrad::zeros(d);
    let mut cur = StateGrad { velocity: grad.velocity.clone(), pressure: grad.pressure.clone(), ..StateGrad::zeros(d) };
    for (i, rec) in ro.tape.iter().enumerate().rev() {
        let g = backward_step(disc, rec, &cur, path, cfg).map_err(|e| e.at_step(i))?;
        params.boundary.iter_mut().zip(&g.boundary).for_each(|(a, b)| crate::math::axpy(a, 1.0, *b));
        params.source.iter_mut().zip(&g.source).for_each(|(a, b)| crate::math::axpy(a, 1.0, *b));
        params.viscosity += g.viscosity;
        cur.velocity = g.velocity;
        cur.pressure = g.pressure;
    }
    params.velocity = cur.velocity;
    params.pressure = cur.pressure;
    Ok(params)
}
