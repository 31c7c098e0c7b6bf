//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use piso_core::stats::MomentAccumulator;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Skewed, correlated `dim`-variate samples with nonzero means.
pub fn random_stream(seed: u64, len: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| {
            let e: f64 = -rng.gen_range(1e-12f64..1.0).ln();
            let g: f64 = rng.gen_range(-1.0..1.0);
            (0..dim).map(|i| 3.0 + i as f64 + e * (1.0 + 0.3 * i as f64) + g * (i as f64 - 1.0)).collect()
        })
        .collect()
}

/// Two-pass central moment of multi-index `alpha` and its conditioning scale, the mean of
/// the absolute deviation products.
pub fn two_pass(samples: &[Vec<f64>], alpha: &[u8]) -> (f64, f64) {
    let n = samples.len() as f64;
    let dim = alpha.len();
    let mean: Vec<f64> = (0..dim).map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / n).collect();
    let mut value = 0.0;
    let mut scale = 0.0;
    for s in samples {
        let prod: f64 = (0..dim).map(|i| (s[i] - mean[i]).powi(alpha[i] as i32)).product();
        value += prod;
        scale += prod.abs();
    }
    (value / n, scale / n)
}

/// Largest conditioning-relative deviation of every tracked moment from the two-pass value.
pub fn moment_error(acc: &MomentAccumulator, samples: &[Vec<f64>]) -> f64 {
    acc.finalize()
        .expect("enough samples")
        .iter()
        .map(|(alpha, v)| {
            let (exact, scale) = two_pass(samples, alpha);
            (v - exact).abs() / scale.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Conditioning-relative distance between two accumulators over the same samples.
pub fn accumulator_distance(a: &MomentAccumulator, b: &MomentAccumulator, samples: &[Vec<f64>]) -> f64 {
    let fa = a.finalize().expect("enough samples");
    let fb = b.finalize().expect("enough samples");
    let mut worst: f64 = 0.0;
    for ((alpha, x), (_, y)) in fa.iter().zip(&fb) {
        let (_, scale) = two_pass(samples, alpha);
        worst = worst.max((x - y).abs() / scale.max(f64::MIN_POSITIVE));
    }
    for (x, y) in a.mean().iter().zip(b.mean()) {
        worst = worst.max((x - y).abs() / x.abs().max(1.0));
    }
    worst
}

pub fn accumulate(samples: &[Vec<f64>], max_order: usize) -> MomentAccumulator {
    let mut acc = MomentAccumulator::new(samples[0].len(), max_order).expect("valid shape");
    for s in samples {
        acc.push(s);
    }
    acc
}

/// `|a − b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
