use piso_core::cases::{presets, run_case};
use piso_core::math::{Vec3, ZERO3};
use piso_core::mesh::generate::{cavity, periodic_box, poiseuille};
use piso_core::mesh::{BoundarySpec, Domain, Side};
use piso_core::piso::{piso_step, Discretization, FlowState, Precision, StepConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn periodic(n: usize) -> Discretization {
    Discretization::new(periodic_box(2, [n, n, 1], [1.0, 1.0, 1.0], [true, true, false]).unwrap())
}

fn uniform_state(disc: &Discretization, u: Vec3, dt: f64) -> FlowState {
    let mut s = FlowState::at_rest(disc.domain(), dt);
    s.velocity = vec![u; disc.domain().n_cells()];
    s
}

#[test]
fn closed_box_at_rest_stays_at_rest() {
    let out = run_case(&presets::closed_box_case(8, 5)).unwrap();
    assert_eq!(out.steps, 5);
    assert!(out.state.velocity.iter().all(|v| *v == ZERO3));
    assert!(out.state.pressure.iter().all(|p| *p == 0.0));
}

#[test]
fn uniform_flow_in_a_periodic_box_is_preserved() {
    let disc = periodic(6);
    let cfg = StepConfig::new(0.01);
    let mut s = uniform_state(&disc, [1.0, 0.5, 0.0], 0.1);
    for _ in 0..5 {
        s = piso_step(&disc, &s, &[], &cfg).unwrap().state;
    }
    for v in &s.velocity {
        assert!((v[0] - 1.0).abs() < 1e-10 && (v[1] - 0.5).abs() < 1e-10, "{v:?}");
    }
}

#[test]
fn uniform_source_accelerates_by_g_dt() {
    let disc = periodic(5);
    let cfg = StepConfig::new(0.1);
    let n = disc.domain().n_cells();
    let s = uniform_state(&disc, ZERO3, 0.25);
    let out = piso_step(&disc, &s, &vec![[2.0, -1.0, 0.0]; n], &cfg).unwrap();
    for v in &out.state.velocity {
        assert!((v[0] - 0.5).abs() < 1e-10 && (v[1] + 0.25).abs() < 1e-10, "{v:?}");
    }
    assert!((out.state.time - 0.25).abs() < 1e-15);
}

#[test]
fn non_orthogonal_correctors_follow_the_skew() {
    let cfg = StepConfig::new(0.1);
    assert_eq!(cfg.non_orthogonal_count(&Discretization::new(poiseuille(8, 0.3).unwrap())), 2);
    assert_eq!(cfg.non_orthogonal_count(&periodic(4)), 0);
    let fixed = StepConfig { non_orthogonal_correctors: Some(1), ..StepConfig::new(0.1) };
    assert_eq!(fixed.non_orthogonal_count(&periodic(4)), 1);
}

#[test]
fn invalid_settings_are_rejected() {
    let disc = periodic(3);
    let s = uniform_state(&disc, ZERO3, 0.1);
    let bad = StepConfig { correctors: 0, ..StepConfig::new(0.1) };
    assert!(piso_step(&disc, &s, &[], &bad).is_err());
    assert!(piso_step(&disc, &s, &[], &StepConfig::new(-1.0)).is_err());
    let mut short = s.clone();
    short.velocity.pop();
    assert!(piso_step(&disc, &short, &[], &StepConfig::new(0.1)).is_err());
}

#[test]
fn runs_are_bitwise_deterministic() {
    let cfg = presets::channel_case([8, 8, 4], 550.0, 5, 42);
    let (a, b) = (run_case(&cfg).unwrap(), run_case(&cfg).unwrap());
    assert_eq!(a.state, b.state);
    let other = run_case(&presets::channel_case([8, 8, 4], 550.0, 5, 43)).unwrap();
    assert_ne!(a.state.velocity, other.state.velocity);
}

#[test]
fn single_precision_fields_are_f32_representable() {
    let mut cfg = presets::cavity_case(8, 100.0, 0.3);
    cfg.precision = Precision::Single;
    let out = run_case(&cfg).unwrap();
    assert!(out.tolerance >= 1e-6);
    for v in out.state.velocity.iter().flatten().chain(&out.state.pressure) {
        assert_eq!(*v as f32 as f64, *v);
    }
}

#[test]
fn lid_drives_a_recirculation() {
    let out = run_case(&presets::cavity_case(16, 100.0, 1.0)).unwrap();
    let d = &out.domain;
    // Fluid under the upper lid follows it; the return flow below opposes it.
    let (top, bottom): (Vec<_>, Vec<_>) = (0..d.n_cells()).partition(|&c| d.center(c)[1] > 0.5);
    let mean = |cells: &[usize]| cells.iter().map(|&c| out.state.velocity[c][0]).sum::<f64>() / cells.len() as f64;
    let lid_row: Vec<usize> = (0..d.n_cells()).filter(|&c| d.center(c)[1] > 1.0 - 1.0 / 16.0).collect();
    assert!(mean(&lid_row) > 0.5 && mean(&top) > 0.0 && mean(&bottom) < 0.0);
}

fn random_walled(seed: u64, theta: f64, dt: f64) -> (Discretization, FlowState) {
    let d = if theta > 0.0 {
        let mut p = poiseuille(6, theta).unwrap().blocks()[0].spec.clone();
        p.set_boundary(Side::lower(0), BoundarySpec::wall(6));
        p.set_boundary(Side::upper(0), BoundarySpec::wall(6));
        Domain::new(vec![p]).unwrap()
    } else {
        cavity(6, 1.0, Side::upper(1), 1.0).unwrap()
    };
    let disc = Discretization::new(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = FlowState::at_rest(disc.domain(), dt);
    s.velocity = (0..disc.domain().n_cells()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0]).collect();
    (disc, s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// An arbitrary field on a walled, possibly skewed block is projected to within the
    /// divergence contract once the deferred cross terms have converged.
    #[test]
    fn corrected_fields_meet_the_divergence_contract(seed in 0u64..10_000, nu in 1e-3f64..0.1, dt in 0.01f64..0.2, theta in 0.0f64..0.3) {
        let (disc, s) = random_walled(seed, theta, dt);
        let cfg = StepConfig { non_orthogonal_correctors: Some(4), ..StepConfig::new(nu) };
        let out = piso_step(&disc, &s, &[], &cfg).unwrap();
        prop_assert!(out.diagnostics.max_divergence <= 10.0 * cfg.tolerance(), "{}", out.diagnostics.max_divergence);
    }

    /// Each extra non-orthogonal corrector shrinks the deferred residual until the solver
    /// tolerance takes over.
    #[test]
    fn non_orthogonal_residual_contracts(seed in 0u64..10_000, theta in 0.1f64..0.3) {
        let (disc, s) = random_walled(seed, theta, 0.1);
        let residual = |k: usize| {
            let cfg = StepConfig { non_orthogonal_correctors: Some(k), ..StepConfig::new(0.05) };
            piso_step(&disc, &s, &[], &cfg).unwrap().diagnostics.max_divergence
        };
        let r: Vec<f64> = (0..4).map(residual).collect();
        for k in 0..3 {
            prop_assert!(r[k + 1] <= 0.5 * r[k] || r[k + 1] <= 10.0 * 1e-8, "{:?}", r);
        }
    }
}
