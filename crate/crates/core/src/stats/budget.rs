use std::fmt::Write as _;

use super::profile::ChannelSlices;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::mesh::Domain;
use crate::piso::kernels::gradient;

type Tensor = [[f64; 3]; 3];

/// Reynolds-stress budget terms per wall-normal slice (no viscosity factor applied).
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetProfile {
    pub y: Vec<f64>,
    /// `P_ij = −(⟨u_i'u_k'⟩ ∂Ū_j/∂x_k + ⟨u_j'u_k'⟩ ∂Ū_i/∂x_k)`.
    pub production: Vec<Tensor>,
    /// `ε_ij = 2 ⟨∂u_i'/∂x_k ∂u_j'/∂x_k⟩`, positive semidefinite.
    pub dissipation: Vec<Tensor>,
    /// `T_ij = −∂⟨u_i'u_j'u_k'⟩/∂x_k`.
    pub transport: Vec<Tensor>,
    /// `D_ij = ∂²⟨u_i'u_j'⟩/∂x_k²`.
    pub diffusion: Vec<Tensor>,
    /// `Π_ij = −⟨u_i' ∂p/∂x_j + u_j' ∂p/∂x_i⟩`.
    pub pressure_gradient: Vec<Tensor>,
}

impl BudgetProfile {
    pub fn to_csv(&self) -> String {
        let names = ["P", "eps", "T", "D", "Pi"];
        let pairs = [(0, 0, "11"), (1, 1, "22"), (2, 2, "33"), (0, 1, "12")];
        let mut s = String::from("y");
        for n in names {
            for (_, _, p) in pairs {
                let _ = write!(s, ",{n}_{p}");
            }
        }
        s.push('\n');
        for k in 0..self.y.len() {
            let _ = write!(s, "{}", self.y[k]);
            for term in [&self.production, &self.dissipation, &self.transport, &self.diffusion, &self.pressure_gradient] {
                for (i, j, _) in pairs {
                    let _ = write!(s, ",{}", term[k][i][j]);
                }
            }
            s.push('\n');
        }
        s
    }
}

fn slice_average(slices: &ChannelSlices, field: impl Fn(usize) -> f64) -> Vec<f64> {
    slices.cells.iter().map(|cells| cells.iter().map(|&c| field(c)).sum::<f64>() / cells.len() as f64).collect()
}

fn broadcast(slices: &ChannelSlices, n: usize, profile: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; n];
    for (s, cells) in slices.cells.iter().enumerate() {
        for &c in cells {
            f[c] = profile[s];
        }
    }
    f
}

/// Slice-averaged physical gradient of a wall-normal profile.
fn profile_gradient(d: &Domain, slices: &ChannelSlices, profile: &[f64]) -> Vec<Vec3> {
    let g = gradient(d, &broadcast(slices, d.n_cells(), profile));
    let avg: Vec<Vec<f64>> = (0..3).map(|k| slice_average(slices, |c| g[c][k])).collect();
    (0..slices.len()).map(|s| [avg[0][s], avg[1][s], avg[2][s]]).collect()
}

/// Budget terms averaged over frames and the homogeneous directions, with derivatives from
/// the solver's gradient operator.
pub fn budget_terms(d: &Domain, velocities: &[Vec<Vec3>], pressures: &[Vec<f64>]) -> Result<BudgetProfile> {
    let slices = ChannelSlices::new(d)?;
    if velocities.is_empty() || velocities.len() != pressures.len() {
        return Err(Error::InvalidInput("budget terms need matching, non-empty velocity and pressure frames".into()));
    }
    let n = d.n_cells();
    if velocities.iter().any(|v| v.len() != n) || pressures.iter().any(|p| p.len() != n) {
        return Err(Error::InvalidInput("frame shape does not match the domain".into()));
    }
    let dim = d.dim();
    let ns = slices.len();
    let frames = velocities.len() as f64;
    let mut mean = vec![[0.0; 3]; ns];
    for v in velocities {
        for i in 0..dim {
            let m = slices.mean_profile(v, i);
            for s in 0..ns {
                mean[s][i] += m[s] / frames;
            }
        }
    }
    let slice_of = {
        let mut f = vec![0; n];
        for (s, cells) in slices.cells.iter().enumerate() {
            for &c in cells {
                f[c] = s;
            }
        }
        f
    };

    let zero = vec![[[0.0; 3]; 3]; ns];
    let (mut rs, mut eps, mut pi) = (zero.clone(), zero.clone(), zero.clone());
    let mut triple = vec![[[[0.0; 3]; 3]; 3]; ns];
    for (v, p) in velocities.iter().zip(pressures) {
        let fluct: Vec<Vec3> = (0..n)
            .map(|c| {
                let m = mean[slice_of[c]];
                [v[c][0] - m[0], v[c][1] - m[1], v[c][2] - m[2]]
            })
            .collect();
        let grads: Vec<Vec<Vec3>> = (0..dim).map(|i| gradient(d, &fluct.iter().map(|u| u[i]).collect::<Vec<_>>())).collect();
        let gp = gradient(d, p);
        for (s, cells) in slices.cells.iter().enumerate() {
            let w = 1.0 / (cells.len() as f64 * frames);
            for &c in cells {
                let u = fluct[c];
                for i in 0..dim {
                    for j in 0..dim {
                        rs[s][i][j] += w * u[i] * u[j];
                        let dd: f64 = (0..dim).map(|k| grads[i][c][k] * grads[j][c][k]).sum();
                        eps[s][i][j] += w * 2.0 * dd;
                        pi[s][i][j] -= w * (u[i] * gp[c][j] + u[j] * gp[c][i]);
                        for k in 0..dim {
                            triple[s][i][j][k] += w * u[i] * u[j] * u[k];
                        }
                    }
                }
            }
        }
    }

    let mean_grad: Vec<Vec<Vec3>> =
        (0..dim).map(|j| profile_gradient(d, &slices, &mean.iter().map(|m| m[j]).collect::<Vec<_>>())).collect();
    let (mut prod, mut trans, mut diff) = (zero.clone(), zero.clone(), zero);
    for i in 0..dim {
        for j in 0..dim {
            for s in 0..ns {
                prod[s][i][j] = -(0..dim).map(|k| rs[s][i][k] * mean_grad[j][s][k] + rs[s][j][k] * mean_grad[i][s][k]).sum::<f64>();
            }
            for k in 0..dim {
                let g = profile_gradient(d, &slices, &triple.iter().map(|t| t[i][j][k]).collect::<Vec<_>>());
                for s in 0..ns {
                    trans[s][i][j] -= g[s][k];
                }
            }
            let g1 = gradient(d, &broadcast(&slices, n, &rs.iter().map(|r| r[i][j]).collect::<Vec<_>>()));
            for k in 0..dim {
                let g2 = gradient(d, &g1.iter().map(|g| g[k]).collect::<Vec<_>>());
                let avg = slice_average(&slices, |c| g2[c][k]);
                for s in 0..ns {
                    diff[s][i][j] += avg[s];
                }
            }
        }
    }
    Ok(BudgetProfile { y: slices.y.clone(), production: prod, dissipation: eps, transport: trans, diffusion: diff, pressure_gradient: pi })
}
