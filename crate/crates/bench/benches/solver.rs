use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use piso_core::adjoint::{backward_step, GradientPath, StateGrad};
use piso_core::cases::{initial_velocity, presets};
use piso_core::linalg::{solve, Nullspace, Precond, SolveOptions, SolverKind};
use piso_core::piso::kernels::{assemble_predictor, assemble_pressure, face_fluxes};
use piso_core::piso::{piso_step, Discretization, FlowState, StepConfig};

/// Scaling-task box at resolution `n × n` with its Gaussian start.
fn setup(n: usize) -> (Discretization, FlowState, StepConfig) {
    let cfg = presets::scaling_task([n, n], 1, 1e-2, GradientPath::Full);
    let disc = Discretization::new(cfg.mesh.build().unwrap());
    let mut state = FlowState::at_rest(disc.domain(), 0.5);
    state.velocity = initial_velocity(&cfg, disc.domain()).unwrap();
    (disc, state, cfg.step_config())
}

fn assembly(c: &mut Criterion) {
    let mut g = c.benchmark_group("assembly");
    for n in [16, 32, 64] {
        let (disc, s, cfg) = setup(n);
        let d = disc.domain();
        let flux = face_fluxes(d, &s.velocity, &s.boundary);
        g.bench_with_input(BenchmarkId::new("predictor", n), &n, |b, _| {
            b.iter(|| assemble_predictor(d, black_box(&s.velocity), &s.boundary, &flux, cfg.viscosity, s.dt, &[]).unwrap())
        });
        let a = vec![4.0; d.n_cells()];
        g.bench_with_input(BenchmarkId::new("pressure", n), &n, |b, _| b.iter(|| assemble_pressure(d, black_box(&a)).unwrap()));
    }
    g.finish();
}

fn step(c: &mut Criterion) {
    let mut g = c.benchmark_group("piso_step");
    g.sample_size(20);
    for n in [16, 32, 64] {
        let (disc, s, cfg) = setup(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| piso_step(&disc, black_box(&s), &[], &cfg).unwrap()));
    }
    g.finish();
}

fn backward(c: &mut Criterion) {
    let mut g = c.benchmark_group("backward_step");
    g.sample_size(20);
    let (disc, s, cfg) = setup(32);
    let cfg = cfg.recording(true);
    let rec = piso_step(&disc, &s, &[], &cfg).unwrap().record.unwrap();
    let seed = StateGrad::from_velocity(disc.domain(), s.velocity.clone());
    for path in GradientPath::ALL {
        g.bench_function(path.name(), |b| b.iter(|| backward_step(&disc, &rec, black_box(&seed), path, &cfg).unwrap()));
    }
    g.finish();
}

fn solvers(c: &mut Criterion) {
    let mut g = c.benchmark_group("linear_solve");
    let (disc, s, cfg) = setup(32);
    let d = disc.domain();
    let flux = face_fluxes(d, &s.velocity, &s.boundary);
    let sys = assemble_predictor(d, &s.velocity, &s.boundary, &flux, cfg.viscosity, s.dt, &[]).unwrap();
    let rhs: Vec<f64> = sys.rhs.iter().map(|v| v[0]).collect();
    let zero = vec![0.0; d.n_cells()];
    let opts = SolveOptions::new(1e-10, 5000);
    for (name, p) in [("bicgstab_none", Precond::None), ("bicgstab_ilu0", Precond::Ilu0)] {
        g.bench_function(name, |b| b.iter(|| solve(&sys.matrix, black_box(&rhs), &zero, SolverKind::BiCgStab(p), &opts)));
    }
    let a = sys.matrix.diagonal();
    let lap = assemble_pressure(d, &a).unwrap();
    let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
    let b_p: Vec<f64> = rhs.iter().map(|x| x - mean).collect();
    g.bench_function("cg_pressure", |b| b.iter(|| solve(&lap, black_box(&b_p), &zero, SolverKind::Cg(Nullspace::Constant), &opts)));
    g.finish();
}

criterion_group!(benches, assembly, step, backward, solvers);
criterion_main!(benches);
