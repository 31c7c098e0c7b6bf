use std::fmt::Write as _;
use std::time::Instant;

use super::config::{uniform_source, CaseConfig, Duration, OptimizationSpec, Parameter, StepSize};
use super::run::{cfl_dt, initial_velocity};
use crate::adjoint::{backward_rollout, rollout, GradientPath, Rollout, StateGrad};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::piso::{Discretization, FlowState, StepConfig};

/// Per-iteration record of a gradient-descent run. Entry `i` describes the parameters before
/// update `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizationTrace {
    pub names: Vec<String>,
    pub path: GradientPath,
    pub loss: Vec<f64>,
    /// One value per optimized parameter; the source field is reported by its mean x-component.
    pub parameters: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub grad_norm: Vec<f64>,
    /// Seconds since the start of the optimization, taken after each gradient evaluation.
    pub wall_time: Vec<f64>,
    pub backward_time: Vec<f64>,
    /// Reason the run stopped early because of a non-finite loss or a failed solve.
    pub diverged: Option<String>,
}

impl OptimizationTrace {
    fn new(names: Vec<String>, targets: Vec<f64>, path: GradientPath) -> Self {
        OptimizationTrace {
            names,
            path,
            loss: Vec::new(),
            parameters: Vec::new(),
            targets,
            grad_norm: Vec::new(),
            wall_time: Vec::new(),
            backward_time: Vec::new(),
            diverged: None,
        }
    }

    pub fn len(&self) -> usize {
        self.loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loss.is_empty()
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.loss.last().copied()
    }

    pub fn min_loss(&self) -> Option<f64> {
        self.loss.iter().copied().reduce(f64::min)
    }

    /// First iteration whose loss is below `threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.loss.iter().position(|&l| l < threshold)
    }

    pub fn time_to(&self, threshold: f64) -> Option<f64> {
        self.iterations_to(threshold).map(|i| self.wall_time[i])
    }

    /// `|θ − θ*|` per parameter at the last recorded iteration.
    pub fn parameter_error(&self) -> Vec<f64> {
        self.parameters.last().map(|p| p.iter().zip(&self.targets).map(|(a, b)| (a - b).abs()).collect()).unwrap_or_default()
    }

    pub fn median_backward_time(&self) -> Option<f64> {
        median(&self.backward_time)
    }

    /// Columns: iteration, loss, grad_norm, wall_time, backward_time, then one per parameter.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss,grad_norm,wall_time,backward_time");
        for n in &self.names {
            let _ = write!(s, ",{n}");
        }
        s.push('\n');
        for i in 0..self.len() {
            let _ = write!(s, "{i},{:e},{:e},{:e},{:e}", self.loss[i], self.grad_norm[i], self.wall_time[i], self.backward_time[i]);
            for p in &self.parameters[i] {
                let _ = write!(s, ",{p:e}");
            }
            s.push('\n');
        }
        s
    }
}

pub(crate) fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Optimization problem with its reference rollout. Parameters are a flat vector with one
/// segment per [`ParameterSpec`](super::ParameterSpec) in declaration order.
pub struct Problem {
    disc: Discretization,
    spec: OptimizationSpec,
    base: StepConfig,
    shape: Vec<Vec3>,
    source: Vec<Vec3>,
    lid_faces: Vec<usize>,
    weights: Vec<f64>,
    reference: Vec<Vec3>,
    steps: usize,
    dt: f64,
}

impl Problem {
    /// Builds the problem and runs the reference rollout at the target values.
    pub fn new(config: &CaseConfig) -> Result<Self> {
        config.validate()?;
        let spec = config.optimization.clone().ok_or_else(|| Error::InvalidInput("config has no optimization block".into()))?;
        let disc = Discretization::new(config.mesh.build()?);
        let d = disc.domain();
        let lid_faces = match config.mesh.lid() {
            Some(side) => d.boundary_range(0, side).map(|r| r.collect()).unwrap_or_default(),
            None => Vec::new(),
        };
        let weights = (0..d.n_cells()).map(|p| spec.loss_scale * d.cell(p).det).collect();
        let mut problem = Problem {
            shape: initial_velocity(config, d)?,
            source: uniform_source(d, &config.source),
            base: config.step_config(),
            disc,
            spec,
            lid_faces,
            weights,
            reference: Vec::new(),
            steps: 0,
            dt: 0.0,
        };
        let (steps, dt) = problem.schedule(config)?;
        problem.steps = steps;
        problem.dt = dt;
        let target = problem.target();
        problem.reference = problem.forward(&target)?.state.velocity;
        Ok(problem)
    }

    /// Uniform step schedule shared by every iteration and the reference. Courant-limited
    /// schedules use the smaller step of the initial and target configurations so the step
    /// count, and hence the loss landscape, does not jump during the optimization.
    fn schedule(&self, config: &CaseConfig) -> Result<(usize, f64)> {
        let dt = match config.time.step {
            StepSize::Fixed(dt) => dt,
            StepSize::Cfl { target, max_dt } => [self.initial(), self.target()]
                .iter()
                .map(|theta| {
                    let (state, _, _) = self.setup(theta)?;
                    Ok(cfl_dt(self.disc.domain(), &state.velocity, &state.boundary, target, max_dt))
                })
                .collect::<Result<Vec<f64>>>()?
                .into_iter()
                .fold(f64::INFINITY, f64::min),
        };
        Ok(match config.time.duration {
            Duration::Steps(n) => (n, dt),
            Duration::Horizon(t) => {
                let n = ((t / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                (n, t / n as f64)
            }
            Duration::Steady { .. } => unreachable!("rejected by validation"),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn reference(&self) -> &[Vec3] {
        &self.reference
    }

    pub fn spec(&self) -> &OptimizationSpec {
        &self.spec
    }

    fn segment_len(&self, p: Parameter) -> usize {
        match p {
            Parameter::Source => self.disc.domain().n_cells() * self.disc.domain().dim(),
            _ => 1,
        }
    }

    fn fill(&self, pick: impl Fn(&super::ParameterSpec) -> f64) -> Vec<f64> {
        self.spec.parameters.iter().flat_map(|p| vec![pick(p); self.segment_len(p.parameter)]).collect()
    }

    pub fn initial(&self) -> Vec<f64> {
        let dim = self.disc.domain().dim();
        let mut theta = self.fill(|p| p.initial);
        self.zero_transverse_source(&mut theta, dim);
        theta
    }

    pub fn target(&self) -> Vec<f64> {
        let dim = self.disc.domain().dim();
        let mut theta = self.fill(|p| p.target);
        self.zero_transverse_source(&mut theta, dim);
        theta
    }

    fn zero_transverse_source(&self, theta: &mut [f64], dim: usize) {
        let mut off = 0;
        for p in &self.spec.parameters {
            let len = self.segment_len(p.parameter);
            if p.parameter == Parameter::Source {
                for (i, x) in theta[off..off + len].iter_mut().enumerate() {
                    if i % dim != 0 {
                        *x = 0.0;
                    }
                }
            }
            off += len;
        }
    }

    /// Scalar summary of each parameter segment.
    pub fn summarize(&self, theta: &[f64]) -> Vec<f64> {
        let dim = self.disc.domain().dim();
        let mut off = 0;
        self.spec
            .parameters
            .iter()
            .map(|p| {
                let len = self.segment_len(p.parameter);
                let seg = &theta[off..off + len];
                off += len;
                match p.parameter {
                    Parameter::Source => seg.iter().step_by(dim).sum::<f64>() / (len / dim) as f64,
                    _ => seg[0],
                }
            })
            .collect()
    }

    fn setup(&self, theta: &[f64]) -> Result<(FlowState, Vec<Vec3>, StepConfig)> {
        let d = self.disc.domain();
        let dim = d.dim();
        let mut state = FlowState::at_rest(d, self.dt);
        state.velocity = self.shape.clone();
        let mut source = self.source.clone();
        let mut cfg = self.base.clone();
        let mut off = 0;
        for p in &self.spec.parameters {
            let len = self.segment_len(p.parameter);
            let seg = &theta[off..off + len];
            off += len;
            match p.parameter {
                Parameter::InitialScale => state.velocity.iter_mut().for_each(|v| *v = v.map(|x| x * seg[0])),
                Parameter::LidVelocity => self.lid_faces.iter().for_each(|&b| state.boundary[b][0] = seg[0]),
                Parameter::Viscosity => cfg.viscosity = seg[0],
                Parameter::Source => {
                    source = seg.chunks(dim).map(|c| std::array::from_fn(|i| c.get(i).copied().unwrap_or(0.0))).collect();
                }
            }
        }
        Ok((state, source, cfg))
    }

    pub fn forward(&self, theta: &[f64]) -> Result<Rollout> {
        let (state, source, cfg) = self.setup(theta)?;
        rollout(&self.disc, &state, &source, &cfg, self.steps)
    }

    /// Data term `Σ_P w_P |u_P − û_P|²` with `w_P = loss_scale · J_P`, without weight decay.
    pub fn data_loss(&self, velocity: &[Vec3]) -> f64 {
        velocity
            .iter()
            .zip(&self.reference)
            .zip(&self.weights)
            .map(|((u, r), w)| w * (0..3).map(|i| (u[i] - r[i]).powi(2)).sum::<f64>())
            .sum()
    }

    /// Total loss including weight decay.
    pub fn loss(&self, theta: &[f64], ro: &Rollout) -> f64 {
        self.data_loss(&ro.state.velocity) + crate::stats::weight_decay(theta, self.spec.weight_decay).0
    }

    /// Gradient of [`Problem::loss`] through the recorded rollout along `path`.
    pub fn gradient(&self, theta: &[f64], ro: &Rollout, path: GradientPath) -> Result<Vec<f64>> {
        let d = self.disc.domain();
        let dim = d.dim();
        let seed: Vec<Vec3> = ro
            .state
            .velocity
            .iter()
            .zip(&self.reference)
            .zip(&self.weights)
            .map(|((u, r), w)| std::array::from_fn(|i| 2.0 * w * (u[i] - r[i])))
            .collect();
        let (_, _, cfg) = self.setup(theta)?;
        let g = backward_rollout(&self.disc, ro, &StateGrad::from_velocity(d, seed), path, &cfg)?;
        let mut out = Vec::with_capacity(theta.len());
        for p in &self.spec.parameters {
            match p.parameter {
                Parameter::InitialScale => {
                    out.push(g.velocity.iter().zip(&self.shape).map(|(a, b)| (0..3).map(|i| a[i] * b[i]).sum::<f64>()).sum())
                }
                Parameter::LidVelocity => out.push(self.lid_faces.iter().map(|&b| g.boundary[b][0]).sum()),
                Parameter::Viscosity => out.push(g.viscosity),
                Parameter::Source => out.extend(g.source.iter().flat_map(|v| v[..dim].to_vec())),
            }
        }
        let (_, wd) = crate::stats::weight_decay(theta, self.spec.weight_decay);
        out.iter_mut().zip(wd).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    fn learning_rates(&self) -> Vec<f64> {
        self.fill(|p| p.learning_rate)
    }

    /// Plain gradient descent from the initial values.
    pub fn run(&self) -> OptimizationTrace {
        let names = self.spec.parameters.iter().map(|p| p.parameter.name().to_string()).collect();
        let targets = self.summarize(&self.target());
        let mut trace = OptimizationTrace::new(names, targets, self.spec.path);
        let lr = self.learning_rates();
        let mut theta = self.initial();
        let start = Instant::now();
        for it in 0..self.spec.iterations {
            let ro = match self.forward(&theta) {
                Ok(ro) => ro,
                Err(e) => {
                    trace.diverged = Some(format!("iteration {it}: forward failed: {e}"));
                    break;
                }
            };
            let loss = self.loss(&theta, &ro);
            if !loss.is_finite() {
                trace.diverged = Some(format!("iteration {it}: non-finite loss"));
                break;
            }
            let tb = Instant::now();
            let grad = match self.gradient(&theta, &ro, self.spec.path) {
                Ok(g) => g,
                Err(e) => {
                    trace.diverged = Some(format!("iteration {it}: backward failed: {e}"));
                    break;
                }
            };
            trace.backward_time.push(tb.elapsed().as_secs_f64());
            trace.loss.push(loss);
            trace.parameters.push(self.summarize(&theta));
            trace.grad_norm.push(crate::math::l2(&grad));
            trace.wall_time.push(start.elapsed().as_secs_f64());
            if self.spec.stop_loss.is_some_and(|s| loss < s) {
                break;
            }
            theta.iter_mut().zip(grad.iter().zip(&lr)).for_each(|(t, (g, r))| *t -= r * g);
            if !theta.iter().all(|x| x.is_finite()) {
                trace.diverged = Some(format!("iteration {it}: non-finite parameters"));
                break;
            }
        }
        trace
    }
}

/// Gradient descent on the configured parameters against an in-process reference rollout.
pub fn optimize(config: &CaseConfig) -> Result<OptimizationTrace> {
    Ok(Problem::new(config)?.run())
}

/// Rollout length, learning rate and iteration budget of one ablation column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AblationSetting {
    pub steps: usize,
    pub learning_rate: f64,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct AblationRun {
    pub setting: AblationSetting,
    pub path: GradientPath,
    pub trace: OptimizationTrace,
}

/// Reruns the optimization of `config` for every setting and path. Learning rates replace the
/// configured ones for all parameters; divergence is recorded in the trace.
pub fn path_ablation(config: &CaseConfig, paths: &[GradientPath], settings: &[AblationSetting]) -> Result<Vec<AblationRun>> {
    let mut runs = Vec::with_capacity(paths.len() * settings.len());
    for setting in settings {
        let mut cfg = config.clone();
        cfg.time.duration = Duration::Steps(setting.steps);
        let spec = cfg.optimization.as_mut().ok_or_else(|| Error::InvalidInput("config has no optimization block".into()))?;
        spec.iterations = setting.iterations;
        spec.parameters.iter_mut().for_each(|p| p.learning_rate = setting.learning_rate);
        // One reference rollout per setting; only the backward path varies.
        let mut problem = Problem::new(&cfg)?;
        for &path in paths {
            problem.spec.path = path;
            runs.push(AblationRun { setting: *setting, path, trace: problem.run() });
        }
    }
    Ok(runs)
}

/// Long-format traces: `path,steps,learning_rate,iteration,loss,grad_norm,wall_time,backward_time`.
pub fn ablation_csv(runs: &[AblationRun]) -> String {
    let mut s = String::from("path,steps,learning_rate,iteration,loss,grad_norm,wall_time,backward_time\n");
    for r in runs {
        let t = &r.trace;
        for i in 0..t.len() {
            let _ = writeln!(
                s,
                "{},{},{:e},{i},{:e},{:e},{:e},{:e}",
                r.path, r.setting.steps, r.setting.learning_rate, t.loss[i], t.grad_norm[i], t.wall_time[i], t.backward_time[i]
            );
        }
    }
    s
}

/// Wall time to reach `threshold` per path (rows) and setting (columns); `-` when never
/// reached.
pub fn ablation_table(runs: &[AblationRun], threshold: f64) -> String {
    let mut settings: Vec<AblationSetting> = Vec::new();
    let mut paths: Vec<GradientPath> = Vec::new();
    for r in runs {
        if !settings.contains(&r.setting) {
            settings.push(r.setting);
        }
        if !paths.contains(&r.path) {
            paths.push(r.path);
        }
    }
    let mut s = String::from("path");
    for st in &settings {
        let _ = write!(s, ",n={} lr={}", st.steps, st.learning_rate);
    }
    s.push('\n');
    for p in &paths {
        s.push_str(p.name());
        for st in &settings {
            let cell = runs
                .iter()
                .find(|r| r.path == *p && r.setting == *st)
                .and_then(|r| r.trace.time_to(threshold))
                .map_or("-".to_string(), |t| format!("{t:.4}"));
            let _ = write!(s, ",{cell}");
        }
        s.push('\n');
    }
    s
}

/// Median backward-pass seconds per path over `repeats` reverse passes of one recorded
/// rollout at the initial parameters.
pub fn backward_timing(config: &CaseConfig, paths: &[GradientPath], repeats: usize) -> Result<Vec<(GradientPath, f64)>> {
    let problem = Problem::new(config)?;
    let theta = problem.initial();
    let ro = problem.forward(&theta)?;
    let mut out = Vec::with_capacity(paths.len());
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(repeats); paths.len()];
    // Interleave paths so slow drifts in machine load affect all of them alike.
    for _ in 0..repeats.max(1) {
        for (k, &path) in paths.iter().enumerate() {
            let t = Instant::now();
            problem.gradient(&theta, &ro, path)?;
            samples[k].push(t.elapsed().as_secs_f64());
        }
    }
    for (k, &path) in paths.iter().enumerate() {
        out.push((path, median(&samples[k]).unwrap_or(0.0)));
    }
    Ok(out)
}
