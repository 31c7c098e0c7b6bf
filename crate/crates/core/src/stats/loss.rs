use super::profile::ChannelSlices;
use crate::error::{Error, Result};
use crate::math::{Vec3, ZERO3};

/// Weights of the statistics, source, divergence and parameter-decay loss terms.
#[derive(Clone, Debug, PartialEq)]
pub struct LossWeights {
    pub mean: [f64; 3],
    /// Indexed `[i][j]`; each listed pair contributes once.
    pub covariance: [[f64; 3]; 3],
    pub per_frame: f64,
    pub source: f64,
    pub divergence: f64,
    pub weight_decay: f64,
}

impl LossWeights {
    /// Channel-flow setting: mean weights 1, 0.5, 0.5; normal stresses and `u'v'` weighted 1;
    /// per-frame weight 0.5; source 1; divergence modification 1e-4.
    pub fn channel() -> Self {
        let mut covariance = [[0.0; 3]; 3];
        for (i, row) in covariance.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        covariance[0][1] = 1.0;
        LossWeights { mean: [1.0, 0.5, 0.5], covariance, per_frame: 0.5, source: 1.0, divergence: 1e-4, weight_decay: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self.mean.iter().chain(self.covariance.iter().flatten()).chain([
            &self.per_frame,
            &self.source,
            &self.divergence,
            &self.weight_decay,
        ]);
        for w in all {
            if !(*w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!("loss weights must be finite and nonnegative, got {w}")));
            }
        }
        Ok(())
    }
}

/// Reference mean and covariance per slice.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceStats {
    pub mean: Vec<Vec3>,
    pub cov: Vec<[[f64; 3]; 3]>,
}

impl SliceStats {
    /// Population statistics over all cells of each slice across `frames`.
    pub fn from_frames(slices: &ChannelSlices, frames: &[&[Vec3]]) -> Self {
        let ns = slices.len();
        let mut mean = vec![ZERO3; ns];
        let mut cov = vec![[[0.0; 3]; 3]; ns];
        for (s, cells) in slices.cells.iter().enumerate() {
            let count = (cells.len() * frames.len()) as f64;
            for f in frames {
                for &c in cells {
                    for i in 0..3 {
                        mean[s][i] += f[c][i] / count;
                    }
                }
            }
            for f in frames {
                for &c in cells {
                    for i in 0..3 {
                        for j in 0..3 {
                            cov[s][i][j] += (f[c][i] - mean[s][i]) * (f[c][j] - mean[s][j]) / count;
                        }
                    }
                }
            }
        }
        SliceStats { mean, cov }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StatsLoss {
    pub value: f64,
    /// `∂L/∂u` per frame.
    pub gradient: Vec<Vec<Vec3>>,
}

/// Window loss over all frames plus per-frame losses:
/// `Σ_i λ_Ui L_Ui + Σ_ij λ_ij L_ij + λ_frame Σ_n (Σ_i λ_Ui L^n_Ui + Σ_ij λ_ij L^n_ij)` with
/// `L = (1/Y) Σ_y (stat(y) − ref(y))²`.
pub fn stats_loss(slices: &ChannelSlices, frames: &[&[Vec3]], reference: &SliceStats, w: &LossWeights) -> Result<StatsLoss> {
    w.validate()?;
    let ns = slices.len();
    if reference.mean.len() != ns || reference.cov.len() != ns {
        return Err(Error::InvalidInput(format!("reference has {} slices, channel has {ns}", reference.mean.len())));
    }
    if frames.is_empty() {
        return Err(Error::InvalidInput("statistics loss needs at least one frame".into()));
    }
    let n_cells: usize = slices.cells.iter().map(Vec::len).sum();
    if frames.iter().any(|f| f.len() != n_cells) {
        return Err(Error::InvalidInput("frame shape does not match the channel".into()));
    }
    let mut gradient = vec![vec![ZERO3; n_cells]; frames.len()];
    let mut value = window_term(slices, frames, &(0..frames.len()).collect::<Vec<_>>(), reference, w, 1.0, &mut gradient);
    if w.per_frame > 0.0 {
        for n in 0..frames.len() {
            value += window_term(slices, frames, &[n], reference, w, w.per_frame, &mut gradient);
        }
    }
    Ok(StatsLoss { value, gradient })
}

fn window_term(
    slices: &ChannelSlices,
    frames: &[&[Vec3]],
    window: &[usize],
    reference: &SliceStats,
    w: &LossWeights,
    scale: f64,
    gradient: &mut [Vec<Vec3>],
) -> f64 {
    let sub: Vec<&[Vec3]> = window.iter().map(|&n| frames[n]).collect();
    let stats = SliceStats::from_frames(slices, &sub);
    let y = slices.len() as f64;
    let mut value = 0.0;
    for (s, cells) in slices.cells.iter().enumerate() {
        let mut g_mean = ZERO3;
        let mut g_cov = [[0.0; 3]; 3];
        for i in 0..3 {
            let e = stats.mean[s][i] - reference.mean[s][i];
            value += scale * w.mean[i] * e * e / y;
            g_mean[i] = scale * w.mean[i] * 2.0 * e / y;
            for j in 0..3 {
                let e = stats.cov[s][i][j] - reference.cov[s][i][j];
                value += scale * w.covariance[i][j] * e * e / y;
                g_cov[i][j] = scale * w.covariance[i][j] * 2.0 * e / y;
            }
        }
        let count = (cells.len() * window.len()) as f64;
        for &n in window {
            for &c in cells {
                let dev: Vec3 = std::array::from_fn(|i| frames[n][c][i] - stats.mean[s][i]);
                for a in 0..3 {
                    let sym: f64 = (0..3).map(|b| (g_cov[a][b] + g_cov[b][a]) * dev[b]).sum();
                    gradient[n][c][a] += (g_mean[a] + sym) / count;
                }
            }
        }
    }
    value
}

/// `λ_S (1/N) Σ_n ‖S^n‖²` and its gradient.
pub fn source_penalty(sources: &[&[Vec3]], weight: f64) -> (f64, Vec<Vec<Vec3>>) {
    let n = sources.len().max(1) as f64;
    let value = weight / n * sources.iter().flat_map(|s| s.iter()).map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sum::<f64>();
    let grad = sources.iter().map(|s| s.iter().map(|v| v.map(|x| 2.0 * weight / n * x)).collect()).collect();
    (value, grad)
}

/// `λ_WD ‖θ‖²` and its gradient.
pub fn weight_decay(params: &[f64], weight: f64) -> (f64, Vec<f64>) {
    (weight * params.iter().map(|x| x * x).sum::<f64>(), params.iter().map(|x| 2.0 * weight * x).collect())
}

/// One term of [`aggregate_error`].
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorTerm<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
    pub reference: &'a [f64],
}

/// `Σ_λ (1 / max|λ̂|) (1/Y) Σ_y |λ_y − λ̂_y|² Δy` with `Y = Σ Δy`. Returns the total and the
/// per-term contributions.
pub fn aggregate_error(terms: &[ErrorTerm<'_>], dy: &[f64]) -> Result<(f64, Vec<f64>)> {
    let total_dy: f64 = dy.iter().sum();
    if !(total_dy > 0.0) {
        return Err(Error::InvalidInput("cell sizes must sum to a positive value".into()));
    }
    let mut parts = Vec::with_capacity(terms.len());
    for t in terms {
        if t.values.len() != dy.len() || t.reference.len() != dy.len() {
            return Err(Error::InvalidInput(format!("term `{}` does not match the {} sample points", t.name, dy.len())));
        }
        let max_ref = t.reference.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if max_ref == 0.0 {
            return Err(Error::Undefined(format!("reference of `{}` is identically zero", t.name)));
        }
        let sum: f64 = t.values.iter().zip(t.reference).zip(dy).map(|((v, r), h)| (v - r).powi(2) * h).sum();
        parts.push(sum / (max_ref * total_dy));
    }
    Ok((parts.iter().sum(), parts))
}
