mod support;

use piso_core::cases::{presets, run_case};
use piso_core::math::Vec3;
use piso_core::mesh::generate::{channel, periodic_box};
use piso_core::stats::{
    aggregate_error, budget_terms, friction_velocity, stats_loss, temporal_correlation, vorticity, vorticity_correlation, ChannelSlices,
    ChannelStatistics, ErrorTerm, LossWeights, MomentAccumulator, SliceStats,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{accumulate, accumulator_distance, moment_error, random_stream};

#[test]
fn online_moments_match_two_pass() {
    let samples = random_stream(1, 4000, 3);
    assert!(moment_error(&accumulate(&samples, 4), &samples) < 1e-12);
    let mut batched = MomentAccumulator::new(3, 4).unwrap();
    batched.push_batch(samples.iter().map(Vec::as_slice));
    assert!(moment_error(&batched, &samples) < 1e-12);
}

#[test]
fn higher_orders_and_derived_quantities() {
    let samples = random_stream(2, 2000, 2);
    let acc = accumulate(&samples, 6);
    assert!(moment_error(&acc, &samples) < 1e-11);
    let (m2, _) = support::two_pass(&samples, &[2, 0]);
    let (m3, _) = support::two_pass(&samples, &[3, 0]);
    let (m4, _) = support::two_pass(&samples, &[4, 0]);
    assert!((acc.skewness(0).unwrap() - m3 / m2.powf(1.5)).abs() < 1e-10);
    assert!((acc.flatness(0).unwrap() - m4 / (m2 * m2)).abs() < 1e-10);
}

#[test]
fn shape_mismatches_are_errors() {
    let mut a = MomentAccumulator::new(2, 4).unwrap();
    assert!(a.merge(&MomentAccumulator::new(3, 4).unwrap()).is_err());
    assert!(a.merge(&MomentAccumulator::new(2, 3).unwrap()).is_err());
    assert!(MomentAccumulator::new(2, 1).is_err());
    a.push(&[1.0, 2.0]);
    a.push(&[1.0, 3.0]);
    assert!(a.comoment(&[0, 0, 0, 0, 0]).is_err());
    assert!(a.skewness(0).is_err(), "constant component has no skewness");
}

#[test]
fn poiseuille_friction_velocity_is_exact() {
    // G = 1, ν = 1: wall slope 1/2, so u_τ = sqrt(1/2).
    let cfg = presets::poiseuille_case(16, 0.0, 1.0, 1.0);
    let out = run_case(&cfg).unwrap();
    let slices = ChannelSlices::new(&out.domain).unwrap();
    let fv = friction_velocity(&slices, &out.state.velocity, [0.0, 0.0], 1.0);
    assert!((fv.u_tau - 0.5f64.sqrt()).abs() < 1e-6, "{}", fv.u_tau);
    assert!((fv.re_tau - 0.5f64.sqrt() * 0.5).abs() < 1e-6);
}

#[test]
fn channel_statistics_merge_equals_single_pass() {
    let d = channel(3, [4, 6, 3], [1.0, 2.0, 1.0], 1.1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frames: Vec<(Vec<Vec3>, Vec<f64>)> = (0..6)
        .map(|_| {
            let u = (0..d.n_cells()).map(|_| [rng.gen_range(0.0..1.0), rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)]).collect();
            let p = (0..d.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (u, p)
        })
        .collect();
    let mut all = ChannelStatistics::new(&d, 4).unwrap();
    let (mut a, mut b) = (ChannelStatistics::new(&d, 4).unwrap(), ChannelStatistics::new(&d, 4).unwrap());
    for (k, (u, p)) in frames.iter().enumerate() {
        all.record(u, p);
        if k < 2 {
            a.record(u, p)
        } else {
            b.record(u, p)
        }
    }
    a.merge(&b).unwrap();
    assert_eq!(a.frames(), 6);
    let (pa, pb) = (all.profile(0.01, [0.0, 0.0]).unwrap(), a.profile(0.01, [0.0, 0.0]).unwrap());
    for s in 0..pa.y.len() {
        for i in 0..3 {
            assert!((pa.mean[s][i] - pb.mean[s][i]).abs() < 1e-14);
            for j in 0..3 {
                assert!((pa.cov[s][i][j] - pb.cov[s][i][j]).abs() < 1e-14);
            }
        }
    }
    let other = periodic_box(3, [4, 6, 3], [1.0, 2.0, 1.0], [true, false, true]).unwrap();
    assert!(a.merge(&ChannelStatistics::new(&other, 4).unwrap()).is_err());
}

#[test]
fn laminar_profile_has_no_turbulent_budget() {
    let d = channel(2, [4, 8, 1], [1.0, 2.0, 1.0], 1.0).unwrap();
    let u: Vec<Vec3> = d.centers().iter().map(|c| [c[1] * (2.0 - c[1]), 0.0, 0.0]).collect();
    let p = vec![0.0; d.n_cells()];
    let b = budget_terms(&d, &[u.clone(), u], &[p.clone(), p]).unwrap();
    for term in [&b.production, &b.dissipation, &b.transport, &b.pressure_gradient] {
        assert!(term.iter().flatten().flatten().all(|x| x.abs() < 1e-12));
    }
    assert!(b.to_csv().starts_with("y,P_11"));
}

#[test]
fn aggregate_error_hand_case() {
    // One term: values off by 1 at one of two points, reference peak 2, Δy = [1, 3].
    let terms = [ErrorTerm { name: "u", values: &[1.0, 3.0], reference: &[1.0, 2.0] }];
    let (total, parts) = aggregate_error(&terms, &[1.0, 3.0]).unwrap();
    // (1 / 2) · (1 / 4) · (0 + 1 · 3) = 0.375.
    assert!((total - 0.375).abs() < 1e-15 && parts == vec![total]);
    let zero = [ErrorTerm { name: "v", values: &[1.0, 1.0], reference: &[0.0, 0.0] }];
    assert!(aggregate_error(&zero, &[1.0, 1.0]).is_err());
}

#[test]
fn temporal_correlation_of_a_sinusoid() {
    let frames: Vec<Vec<f64>> = (0..400).map(|t| vec![(t as f64 * 0.1).sin(), (t as f64 * 0.1).cos()]).collect();
    let r = temporal_correlation(&frames, &frames, 20).unwrap();
    assert!((r[0] - 1.0).abs() < 1e-12);
    // Lag τ shifts the phase by 0.1 τ, and sin² + cos² makes every start time agree.
    assert!((r[10] - 1.0f64.cos()).abs() < 1e-12, "{}", r[10]);
    assert!(temporal_correlation(&frames, &frames, 400).is_err());
}

#[test]
fn solid_body_rotation_has_uniform_vorticity() {
    let d = periodic_box(2, [8, 8, 1], [1.0, 1.0, 1.0], [false, false, false]).unwrap();
    let u: Vec<Vec3> = d.centers().iter().map(|c| [-(c[1] - 0.5), c[0] - 0.5, 0.0]).collect();
    let w = vorticity(&d, &u);
    // Interior cells see exact central differences of a linear field.
    let interior: Vec<f64> = (0..d.n_cells())
        .filter(|&c| (0.15..0.85).contains(&d.center(c)[0]) && (0.15..0.85).contains(&d.center(c)[1]))
        .map(|c| w[c][2])
        .collect();
    assert!(interior.iter().all(|x| (x - 2.0).abs() < 1e-12));
    let r = vorticity_correlation(&interior, &vec![1.0; interior.len()]).unwrap();
    assert!((r - 1.0).abs() < 1e-14);
}

#[test]
fn stats_loss_gradient_matches_finite_differences() {
    let d = channel(2, [3, 4, 1], [1.0, 2.0, 1.0], 1.0).unwrap();
    let slices = ChannelSlices::new(&d).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut field = || -> Vec<Vec3> { (0..d.n_cells()).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0]).collect() };
    let frames = [field(), field(), field()];
    let refs = [field(), field()];
    let reference = SliceStats::from_frames(&slices, &[&refs[0], &refs[1]]);
    let w = LossWeights::channel();
    let eval = |fr: &[Vec<Vec3>]| stats_loss(&slices, &fr.iter().map(Vec::as_slice).collect::<Vec<_>>(), &reference, &w).unwrap();
    let base = eval(&frames);
    let h = 1e-6;
    for (n, c, i) in [(0, 0, 0), (1, 5, 1), (2, 11, 0), (2, 3, 1)] {
        let mut up = frames.clone();
        up[n][c][i] += h;
        let mut dn = frames.clone();
        dn[n][c][i] -= h;
        let numeric = (eval(&up).value - eval(&dn).value) / (2.0 * h);
        let analytic = base.gradient[n][c][i];
        assert!((numeric - analytic).abs() < 1e-7 * analytic.abs().max(1.0), "frame {n} cell {c} comp {i}: {analytic} vs {numeric}");
    }
    assert_eq!(base.gradient[0][0][2], 0.0);
    let bad = LossWeights { source: -1.0, ..LossWeights::channel() };
    assert!(stats_loss(&slices, &[&frames[0]], &reference, &bad).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Splitting a stream anywhere and merging reproduces the single-pass accumulator.
    #[test]
    fn merge_is_split_invariant(seed in 0u64..10_000, len in 8usize..300, cut in 0.0f64..1.0, order in 2usize..6) {
        let samples = random_stream(seed, len, 2);
        let k = ((len as f64 * cut) as usize).clamp(2, len - 2);
        let whole = accumulate(&samples, order);
        let mut left = accumulate(&samples[..k], order);
        left.merge(&accumulate(&samples[k..], order)).unwrap();
        prop_assert!(accumulator_distance(&whole, &left, &samples) < 1e-11);
        prop_assert!((left.count() - len as f64).abs() == 0.0);
    }

    /// Moments are shift invariant for central orders.
    #[test]
    fn central_moments_ignore_offsets(seed in 0u64..10_000, shift in -100.0f64..100.0) {
        let samples = random_stream(seed, 200, 2);
        let shifted: Vec<Vec<f64>> = samples.iter().map(|s| s.iter().map(|x| x + shift).collect()).collect();
        let (a, b) = (accumulate(&samples, 4), accumulate(&shifted, 4));
        prop_assert!(accumulator_distance(&a, &accumulate(&samples, 4), &samples) == 0.0);
        for ((alpha, x), (_, y)) in a.finalize().unwrap().iter().zip(b.finalize().unwrap().iter()) {
            let (_, scale) = support::two_pass(&samples, alpha);
            prop_assert!((x - y).abs() <= 1e-9 * scale.max(1.0), "{:?}", alpha);
        }
    }
}
