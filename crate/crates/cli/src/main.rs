//! `piso` command-line driver.
//!
//! Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or configuration error,
//! 3 a check ran but failed (gradient check, diverged optimization).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use piso_core::adjoint::{gradcheck_suite, GradientPath};
use piso_core::cases::{
    ablation_csv, ablation_table, optimize, path_ablation, presets, run_case_with, AblationRun, AblationSetting, CaseConfig,
    OptimizationTrace,
};
use piso_core::io::{parse_config, read_fields, write_atomic, write_fields, FieldDump};
use piso_core::piso::Precision;
use piso_core::stats::{budget_terms, ChannelStatistics};
use piso_core::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CHECK: u8 = 3;

/// Number of concurrent ablation settings.
const THREADS_ENV: &str = "PISO_THREADS";

#[derive(Parser)]
#[command(name = "piso", version, about = "Differentiable PISO solver for incompressible flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Single,
    Double,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Scaling,
    Lid,
    Viscosity,
    Joint,
}

#[derive(Subcommand)]
enum Command {
    /// Run a case and write field dumps plus a summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configured precision.
        #[arg(long, value_enum)]
        precision: Option<PrecisionArg>,
    },
    /// Gradient descent for a configured or built-in task; writes the trace as CSV.
    Optimize {
        #[arg(long, conflicts_with = "task", required_unless_present = "task")]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        task: Option<Task>,
        #[arg(long)]
        path: Option<GradientPath>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Rollout length for the scaling task.
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gradient-path ablation on the scaling task.
    Ablate {
        #[arg(long, value_enum, default_value = "scaling")]
        task: Task,
        #[arg(long, value_delimiter = ',', default_value = "full,adv,p,none")]
        paths: Vec<GradientPath>,
        #[arg(long, value_delimiter = ',', default_value = "1,10,100")]
        n: Vec<usize>,
        /// Learning rate for every column; default 0.01, or 0.001 for rollouts of 100+ steps.
        #[arg(long)]
        lr: Option<f64>,
        /// Iterations per run; default 60, or 600 with the reduced learning rate.
        #[arg(long)]
        iterations: Option<usize>,
        /// Box resolution as `NXxNY`.
        #[arg(long, default_value = "18x16")]
        resolution: String,
        /// Loss threshold of the time-to-loss table.
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        /// Time-to-loss table (path rows, setting columns).
        #[arg(long)]
        out: PathBuf,
        /// Optional long-format CSV of every trace.
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Finite-difference check of every backward kernel and composite rollout gradients.
    Gradcheck {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value = "double")]
        precision: PrecisionArg,
        /// Maximum sampled entries per checked input.
        #[arg(long, default_value_t = 6)]
        samples: usize,
    },
    /// Channel statistics profiles from field dumps.
    Stats {
        /// Case configuration describing the mesh of the dumps.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Optional Reynolds-stress budget CSV.
        #[arg(long)]
        budget: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::InvalidInput(_) => EXIT_USAGE,
            _ => EXIT_RUNTIME,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: EXIT_RUNTIME, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: EXIT_USAGE, message: message.into() }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load_config(path: &Path) -> Result<CaseConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(parse_config(&text, &path.display().to_string())?)
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, out, precision } => simulate(&config, &out, precision),
        Command::Optimize { config, task, path, iterations, n, out } => {
            let mut cfg = match (config, task) {
                (Some(c), _) => load_config(&c)?,
                (None, Some(t)) => task_config(t, n),
                (None, None) => return Err(usage("either --config or --task is required")),
            };
            let spec = cfg.optimization.as_mut().ok_or_else(|| usage("config has no [optimization] section"))?;
            if let Some(p) = path {
                spec.path = p;
            }
            if let Some(i) = iterations {
                spec.iterations = i;
            }
            let trace = optimize(&cfg)?;
            write_atomic(&out, trace.to_csv().as_bytes())?;
            report_trace(&cfg.name, &trace)
        }
        Command::Ablate { task, paths, n, lr, iterations, resolution, threshold, out, traces } => {
            if !matches!(task, Task::Scaling) {
                return Err(usage("ablation is defined for the scaling task only"));
            }
            let res = parse_resolution(&resolution)?;
            let settings: Vec<AblationSetting> = n
                .iter()
                .map(|&steps| {
                    let rate = lr.unwrap_or(if steps >= 100 { 1e-3 } else { 1e-2 });
                    let its = iterations.unwrap_or(if rate < 1e-2 { 600 } else { 60 });
                    AblationSetting { steps, learning_rate: rate, iterations: its }
                })
                .collect();
            let cfg = presets::scaling_task(res, 1, 1e-2, GradientPath::Full);
            let runs = run_ablation(&cfg, &paths, &settings)?;
            let table = ablation_table(&runs, threshold);
            write_atomic(&out, table.as_bytes())?;
            if let Some(t) = traces {
                write_atomic(&t, ablation_csv(&runs).as_bytes())?;
            }
            print!("{table}");
            for r in runs.iter().filter(|r| r.trace.diverged.is_some()) {
                println!("# {} n={}: {}", r.path, r.setting.steps, r.trace.diverged.as_deref().unwrap_or(""));
            }
            Ok(())
        }
        Command::Gradcheck { seed, precision, samples } => {
            if matches!(precision, PrecisionArg::Single) {
                return Err(usage("gradient checks need double precision; single-precision differences are below the rounding level"));
            }
            let report = gradcheck_suite(seed, samples)?;
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Failure { code: EXIT_CHECK, message: format!("{} gradient checks failed", report.failures().count()) })
            }
        }
        Command::Stats { config, input, out, budget } => stats(&config, &input, &out, budget.as_deref()),
    }
}

fn task_config(task: Task, n: usize) -> CaseConfig {
    match task {
        Task::Scaling => presets::scaling_task(presets::SCALING_RESOLUTION, n, 1e-2, GradientPath::Full),
        Task::Lid => presets::lid_task(),
        Task::Viscosity => presets::viscosity_task(),
        Task::Joint => presets::joint_task(1e-6),
    }
}

fn parse_resolution(s: &str) -> Result<[usize; 2], Failure> {
    let parts: Vec<usize> =
        s.split('x').map(|p| p.trim().parse().map_err(|_| usage(format!("bad resolution `{s}`")))).collect::<Result<_, _>>()?;
    match parts[..] {
        [nx, ny] if nx >= 2 && ny >= 2 => Ok([nx, ny]),
        _ => Err(usage(format!("resolution must be NXxNY with both ≥ 2, got `{s}`"))),
    }
}

fn threads() -> usize {
    std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()).filter(|&n| n > 0).unwrap_or(1)
}

/// Settings run on up to `PISO_THREADS` threads; traces keep the input order.
fn run_ablation(cfg: &CaseConfig, paths: &[GradientPath], settings: &[AblationSetting]) -> Result<Vec<AblationRun>, Failure> {
    let threads = threads().min(settings.len()).max(1);
    if threads == 1 {
        return Ok(path_ablation(cfg, paths, settings)?);
    }
    let chunks: Vec<Result<Vec<AblationRun>, Error>> = std::thread::scope(|s| {
        let handles: Vec<_> =
            settings.chunks(settings.len().div_ceil(threads)).map(|c| s.spawn(move || path_ablation(cfg, paths, c))).collect();
        handles.into_iter().map(|h| h.join().expect("ablation thread panicked")).collect()
    });
    let mut runs = Vec::new();
    for c in chunks {
        runs.extend(c?);
    }
    Ok(runs)
}

fn report_trace(name: &str, trace: &OptimizationTrace) -> Result<(), Failure> {
    let last = trace.parameters.last().cloned().unwrap_or_default();
    println!(
        "{name}: {} iterations, path {}, final loss {:.3e}, parameters {:?}, targets {:?}",
        trace.len(),
        trace.path,
        trace.final_loss().unwrap_or(f64::NAN),
        last,
        trace.targets
    );
    match &trace.diverged {
        Some(reason) => Err(Failure { code: EXIT_CHECK, message: format!("optimization diverged: {reason}") }),
        None => Ok(()),
    }
}

fn simulate(config: &Path, out: &Path, precision: Option<PrecisionArg>) -> Result<(), Failure> {
    let mut cfg = load_config(config)?;
    if let Some(p) = precision {
        cfg.precision = p.into();
    }
    std::fs::create_dir_all(out)?;
    let domain = cfg.mesh.build()?;
    let prec = cfg.precision;
    let mut written = 0usize;
    let output = run_case_with(&cfg, |step, state| {
        let dump = FieldDump::from_state(&domain, state, prec)?;
        write_fields(&out.join(format!("fields_{step:06}.bin")), &dump)?;
        written += 1;
        Ok(())
    })?;
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "case {}: {} steps, t = {:.6}, max divergence {:.3e} (tolerance {:.1e}), {} dumps{}",
        cfg.name,
        output.steps,
        output.state.time,
        output.max_divergence(),
        output.tolerance,
        written,
        if output.converged { "" } else { ", steady state not reached" }
    );
    if let Some(profile) = &output.profile {
        write_atomic(&out.join("profile.csv"), profile.to_csv().as_bytes())?;
        let _ = writeln!(summary, "u_tau {:.6e}, Re_tau {:.3}", profile.u_tau, profile.re_tau);
    }
    write_atomic(&out.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn stats(config: &Path, inputs: &[PathBuf], out: &Path, budget: Option<&Path>) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let domain = cfg.mesh.build()?;
    let order = cfg.stats.map_or(4, |s| s.max_order);
    let mut acc = ChannelStatistics::new(&domain, order)?;
    let mut velocities = Vec::new();
    let mut pressures = Vec::new();
    for path in inputs {
        let dump = read_fields(path).map_err(|e| Failure { code: EXIT_RUNTIME, message: format!("{}: {e}", path.display()) })?;
        let (u, p) = dump.to_fields(&domain)?;
        acc.record(&u, &p);
        if budget.is_some() {
            velocities.push(u);
            pressures.push(p);
        }
    }
    let profile = acc.profile(cfg.viscosity, [0.0, 0.0])?;
    write_atomic(out, profile.to_csv().as_bytes())?;
    if let Some(b) = budget {
        write_atomic(b, budget_terms(&domain, &velocities, &pressures)?.to_csv().as_bytes())?;
    }
    println!("{} frames, u_tau {:.6e}, Re_tau {:.3}", acc.frames(), profile.u_tau, profile.re_tau);
    Ok(())
}
