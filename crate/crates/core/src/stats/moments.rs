//! Streaming central (co)moments of arbitrary order.
//!
//! Central moment sums `C_α = Σ Π_k (x_k − μ_k)^{α_k}` are kept for every multi-index `α`
//! with `2 ≤ |α| ≤ max_order`. Two accumulators merge exactly through the binomial expansion
//! of the shifted deviations, and a single-sample update is a merge with a one-sample set.

use std::collections::HashMap;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MomentAccumulator {
    dim: usize,
    max_order: usize,
    /// Multi-indices ordered by total order; every lower index of an entry precedes it.
    indices: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// For each index, the `(β, Π binom(α_k, β_k))` pairs with `2 ≤ |β| < |α|`, `β ≤ α`.
    expansion: Vec<Vec<(usize, f64)>>,
    count: f64,
    mean: Vec<f64>,
    sums: Vec<f64>,
}

fn binom(n: u8, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn multi_indices(dim: usize, order: usize) -> Vec<Vec<u8>> {
    fn rec(dim: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if cur.len() + 1 == dim {
            cur.push(left as u8);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for k in (0..=left).rev() {
            cur.push(k as u8);
            rec(dim, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, order, &mut Vec::new(), &mut out);
    out
}

/// `Π_k v_k^{γ_k}`.
fn power(v: &[f64], gamma: impl Iterator<Item = u8>) -> f64 {
    v.iter().zip(gamma).fold(1.0, |acc, (x, g)| acc * x.powi(i32::from(g)))
}

impl MomentAccumulator {
    pub fn new(dim: usize, max_order: usize) -> Result<Self> {
        if dim == 0 || !(2..=16).contains(&max_order) {
            return Err(Error::InvalidInput(format!("moment accumulator needs dim ≥ 1 and 2 ≤ order ≤ 16, got {dim}/{max_order}")));
        }
        let indices: Vec<Vec<u8>> = (2..=max_order).flat_map(|o| multi_indices(dim, o)).collect();
        let lookup: HashMap<Vec<u8>, usize> = indices.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
        let expansion = indices
            .iter()
            .map(|a| {
                let order: u8 = a.iter().sum();
                indices
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| b.iter().sum::<u8>() < order && b.iter().zip(a).all(|(x, y)| x <= y))
                    .map(|(j, b)| (j, a.iter().zip(b).map(|(&x, &y)| binom(x, y)).product()))
                    .collect()
            })
            .collect();
        let n = indices.len();
        Ok(MomentAccumulator { dim, max_order, indices, lookup, expansion, count: 0.0, mean: vec![0.0; dim], sums: vec![0.0; n] })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn count(&self) -> f64 {
        self.count
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn push(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim, "sample dimension");
        let n = self.count + 1.0;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        // Deviations of the old set and of the new sample from the combined mean.
        let shift_a: Vec<f64> = delta.iter().map(|d| -d / n).collect();
        let shift_b: Vec<f64> = delta.iter().map(|d| d * self.count / n).collect();
        let old = self.sums.clone();
        for (k, a) in self.indices.iter().enumerate() {
            let mut s = old[k] + self.count * power(&shift_a, a.iter().copied()) + power(&shift_b, a.iter().copied());
            for &(j, c) in &self.expansion[k] {
                let g = a.iter().zip(&self.indices[j]).map(|(x, y)| x - y);
                s += c * old[j] * power(&shift_a, g);
            }
            self.sums[k] = s;
        }
        self.count = n;
        for (m, d) in self.mean.iter_mut().zip(&shift_a) {
            *m -= d;
        }
    }

    /// Adds a batch through its exact two-pass summary, then merges.
    pub fn push_batch<'a>(&mut self, batch: impl IntoIterator<Item = &'a [f64]>) {
        let rows: Vec<&[f64]> = batch.into_iter().collect();
        if rows.is_empty() {
            return;
        }
        let mut b = MomentAccumulator { count: 0.0, mean: vec![0.0; self.dim], sums: vec![0.0; self.sums.len()], ..self.clone() };
        let cnt = rows.len() as f64;
        for r in &rows {
            assert_eq!(r.len(), self.dim, "sample dimension");
            for (m, v) in b.mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        b.mean.iter_mut().for_each(|m| *m /= cnt);
        let mut dev = vec![0.0; self.dim];
        for r in &rows {
            for ((d, v), m) in dev.iter_mut().zip(r.iter()).zip(&b.mean) {
                *d = v - m;
            }
            for (k, a) in b.indices.iter().enumerate() {
                b.sums[k] += power(&dev, a.iter().copied());
            }
        }
        b.count = cnt;
        self.merge(&b).expect("same configuration");
    }

    /// Combines with an accumulator over a disjoint sample set.
    pub fn merge(&mut self, other: &MomentAccumulator) -> Result<()> {
        if other.dim != self.dim || other.max_order != self.max_order {
            return Err(Error::InvalidInput("cannot merge accumulators of different shape".into()));
        }
        if other.count == 0.0 {
            return Ok(());
        }
        if self.count == 0.0 {
            self.count = other.count;
            self.mean.clone_from(&other.mean);
            self.sums.clone_from(&other.sums);
            return Ok(());
        }
        let (na, nb) = (self.count, other.count);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        let shift_a: Vec<f64> = delta.iter().map(|d| -d * nb / n).collect();
        let shift_b: Vec<f64> = delta.iter().map(|d| d * na / n).collect();
        let old = self.sums.clone();
        for (k, a) in self.indices.iter().enumerate() {
            let mut s = old[k] + other.sums[k] + na * power(&shift_a, a.iter().copied()) + nb * power(&shift_b, a.iter().copied());
            for &(j, c) in &self.expansion[k] {
                let g: Vec<u8> = a.iter().zip(&self.indices[j]).map(|(x, y)| x - y).collect();
                s += c * (old[j] * power(&shift_a, g.iter().copied()) + other.sums[j] * power(&shift_b, g.iter().copied()));
            }
            self.sums[k] = s;
        }
        self.count = n;
        for (m, d) in self.mean.iter_mut().zip(&shift_a) {
            *m -= d;
        }
        Ok(())
    }

    /// Population central moment `C_α / n`. Orders 0 and 1 give 1 and 0.
    pub fn central_moment(&self, alpha: &[u8]) -> Result<f64> {
        if alpha.len() != self.dim {
            return Err(Error::InvalidInput(format!("multi-index {alpha:?} does not match dimension {}", self.dim)));
        }
        let order: usize = alpha.iter().map(|&a| usize::from(a)).sum();
        if order > self.max_order {
            return Err(Error::InvalidInput(format!("order {order} exceeds tracked order {}", self.max_order)));
        }
        if self.count < 1.0 {
            return Err(Error::Undefined("no samples".into()));
        }
        match order {
            0 => Ok(1.0),
            1 => Ok(0.0),
            _ if self.count < 2.0 => Err(Error::Undefined(format!("order-{order} moment needs at least 2 samples"))),
            _ => Ok(self.sums[self.lookup[alpha]] / self.count),
        }
    }

    /// Population co-moment of components listed with repetition, e.g. `[0, 1, 1]`.
    pub fn comoment(&self, components: &[usize]) -> Result<f64> {
        let mut alpha = vec![0u8; self.dim];
        for &c in components {
            if c >= self.dim {
                return Err(Error::InvalidInput(format!("component {c} out of range")));
            }
            alpha[c] += 1;
        }
        self.central_moment(&alpha)
    }

    pub fn covariance(&self, i: usize, j: usize) -> Result<f64> {
        self.comoment(&[i, j])
    }

    pub fn skewness(&self, i: usize) -> Result<f64> {
        let v = self.comoment(&[i, i])?;
        if v <= 0.0 {
            return Err(Error::Undefined(format!("zero variance in component {i}")));
        }
        Ok(self.comoment(&[i, i, i])? / v.powf(1.5))
    }

    pub fn flatness(&self, i: usize) -> Result<f64> {
        let v = self.comoment(&[i, i])?;
        if v <= 0.0 {
            return Err(Error::Undefined(format!("zero variance in component {i}")));
        }
        Ok(self.comoment(&[i, i, i, i])? / (v * v))
    }

    /// All tracked multi-indices with their population moments.
    pub fn finalize(&self) -> Result<Vec<(Vec<u8>, f64)>> {
        if self.count < 2.0 {
            return Err(Error::Undefined("central moments need at least 2 samples".into()));
        }
        Ok(self.indices.iter().zip(&self.sums).map(|(a, s)| (a.clone(), s / self.count)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_stream() {
        let mut acc = MomentAccumulator::new(1, 4).unwrap();
        for x in [1.0, 2.0, 3.0] {
            acc.push(&[x]);
        }
        assert_eq!(acc.mean(), &[2.0]);
        assert!((acc.comoment(&[0, 0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!(acc.comoment(&[0, 0, 0]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        let mut acc = MomentAccumulator::new(2, 2).unwrap();
        assert!(matches!(acc.finalize(), Err(Error::Undefined(_))));
        acc.push(&[1.0, 2.0]);
        assert!(matches!(acc.covariance(0, 1), Err(Error::Undefined(_))));
        acc.push(&[2.0, 0.0]);
        assert!((acc.covariance(0, 1).unwrap() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn index_count() {
        let acc = MomentAccumulator::new(3, 4).unwrap();
        // Orders 2, 3, 4 in 3 variables: 6 + 10 + 15.
        assert_eq!(acc.indices.len(), 31);
    }
}
