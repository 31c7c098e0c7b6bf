use piso_core::adjoint::GradientPath;
use piso_core::cases::{
    ablation_csv, ablation_table, cfl_dt, optimize, path_ablation, poiseuille_analytic, presets, run_case, run_case_with, AblationSetting,
    Duration, InitialCondition, Problem, SourceSpec,
};
use piso_core::error::Error;

#[test]
fn poiseuille_analytic_hand_values() {
    assert_eq!(poiseuille_analytic(0.0, 1.0, 1.0), 0.0);
    assert_eq!(poiseuille_analytic(1.0, 1.0, 1.0), 0.0);
    assert!((poiseuille_analytic(0.5, 1.0, 1.0) - 0.125).abs() < 1e-15);
    assert!((poiseuille_analytic(0.25, 1.0, 1.0) - 0.09375).abs() < 1e-15);
    assert!((poiseuille_analytic(0.5, 3.0, 0.5) - 0.75).abs() < 1e-15);
}

#[test]
fn optimization_runs_are_deterministic() {
    let mut cfg = presets::scaling_task([8, 6], 3, 0.01, GradientPath::Full);
    cfg.optimization.as_mut().unwrap().iterations = 4;
    let (a, b) = (optimize(&cfg).unwrap(), optimize(&cfg).unwrap());
    assert_eq!(a.loss, b.loss);
    assert_eq!(a.parameters, b.parameters);
    assert!(a.loss.windows(2).all(|w| w[1] < w[0]), "{:?}", a.loss);
}

#[test]
fn gradient_vanishes_at_the_target() {
    let mut cfg = presets::scaling_task([8, 6], 3, 0.01, GradientPath::Full);
    let o = cfg.optimization.as_mut().unwrap();
    o.parameters[0].initial = o.parameters[0].target;
    let problem = Problem::new(&cfg).unwrap();
    let theta = problem.initial();
    let ro = problem.forward(&theta).unwrap();
    assert_eq!(problem.loss(&theta, &ro), 0.0);
    for path in GradientPath::ALL {
        let g = problem.gradient(&theta, &ro, path).unwrap();
        assert!(g.iter().all(|x| x.abs() < 1e-8), "{path}: {g:?}");
    }
}

#[test]
fn weight_decay_enters_loss_and_gradient() {
    let mut cfg = presets::scaling_task([8, 6], 2, 0.01, GradientPath::Full);
    let o = cfg.optimization.as_mut().unwrap();
    o.parameters[0].initial = o.parameters[0].target;
    o.weight_decay = 0.1;
    let problem = Problem::new(&cfg).unwrap();
    let theta = problem.initial();
    let ro = problem.forward(&theta).unwrap();
    let t = theta[0];
    assert!((problem.loss(&theta, &ro) - 0.1 * t * t).abs() < 1e-14);
    assert!((problem.gradient(&theta, &ro, GradientPath::Full).unwrap()[0] - 0.2 * t).abs() < 1e-8);
}

#[test]
fn invalid_configurations_are_rejected() {
    let base = presets::cavity_case(8, 100.0, 0.5);
    let mut c = base.clone();
    c.source = SourceSpec::WallForcing;
    assert!(matches!(run_case(&c), Err(Error::InvalidInput(_))));
    let mut c = base.clone();
    c.solver.correctors = 0;
    assert!(run_case(&c).is_err());
    let mut c = base.clone();
    c.dump_every = Some(0);
    assert!(run_case(&c).is_err());
    let mut c = base.clone();
    c.time.duration = Duration::Steps(0);
    assert!(run_case(&c).is_err());
    let mut c = base.clone();
    c.initial = InitialCondition::Reichardt { re_tau: 550.0, perturbation: 0.1, seed: 1 };
    assert!(run_case(&c).is_err());
    let mut c = base;
    c.viscosity = f64::NAN;
    assert!(run_case(&c).is_err());
    assert!(Problem::new(&presets::cavity_case(8, 100.0, 0.5)).is_err(), "no optimization block");
}

#[test]
fn observer_sees_every_step_and_can_abort() {
    let mut cfg = presets::closed_box_case(4, 6);
    cfg.dump_every = Some(1);
    let mut seen = Vec::new();
    let out = run_case_with(&cfg, |k, s| {
        seen.push((k, s.time));
        Ok(())
    })
    .unwrap();
    // Step 0 is the initial state.
    assert_eq!(seen.len(), out.steps + 1);
    assert!(seen.windows(2).all(|w| w[1].0 == w[0].0 + 1 && w[1].1 > w[0].1));
    cfg.dump_every = Some(4);
    let mut at = Vec::new();
    run_case_with(&cfg, |k, _| {
        at.push(k);
        Ok(())
    })
    .unwrap();
    assert_eq!(at, [0, 4, 6], "snapshots plus the final state");
    let stop = run_case_with(&cfg, |k, _| if k == 4 { Err(Error::InvalidInput("stop".into())) } else { Ok(()) });
    assert!(stop.is_err());
}

#[test]
fn cfl_step_respects_the_lid() {
    let cfg = presets::cavity_case(8, 100.0, 1.0);
    let d = cfg.mesh.build().unwrap();
    let rest = vec![[0.0; 3]; d.n_cells()];
    let mut boundary = vec![[0.0; 3]; d.n_boundary_faces()];
    assert_eq!(cfl_dt(&d, &rest, &boundary, 0.8, 0.05), 0.05);
    boundary.iter_mut().for_each(|u| u[0] = 100.0);
    let dt = cfl_dt(&d, &rest, &boundary, 0.8, 0.05);
    assert!(dt < 0.05 && dt > 0.0);
}

#[test]
fn trace_and_ablation_tables() {
    let mut cfg = presets::scaling_task([6, 6], 2, 0.01, GradientPath::Full);
    cfg.optimization.as_mut().unwrap().iterations = 3;
    let trace = optimize(&cfg).unwrap();
    let csv = trace.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iteration,loss,grad_norm,wall_time,backward_time,initial_scale");
    assert_eq!(lines.len(), 4);
    assert!(trace.iterations_to(0.0).is_none());
    assert_eq!(trace.iterations_to(f64::INFINITY), Some(0));

    let setting = AblationSetting { steps: 2, learning_rate: 0.01, iterations: 2 };
    let runs = path_ablation(&cfg, &[GradientPath::Full, GradientPath::None], &[setting]).unwrap();
    assert_eq!(runs.len(), 2);
    assert_eq!(ablation_csv(&runs).lines().count(), 1 + 2 * 2);
    assert!(ablation_table(&runs, 1e-5).contains("none"));
}
