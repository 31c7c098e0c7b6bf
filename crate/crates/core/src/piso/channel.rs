//! Turbulent-channel helpers: dynamic pressure-gradient forcing and the initial profile.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::kernels::gradient;
use crate::error::{Error, Result};
use crate::math::{Vec3, ZERO3};
use crate::mesh::{Domain, FaceKind, Side};

/// Centerline Reynolds number estimate `(Re_τ / 0.116)^(1/0.88)`.
pub fn centerline_reynolds(re_tau: f64) -> f64 {
    (re_tau / 0.116).powf(1.0 / 0.88)
}

/// Reichardt's law of the wall `u⁺(y⁺)`.
pub fn reichardt(y_plus: f64) -> f64 {
    const KAPPA: f64 = 0.41;
    (1.0 + KAPPA * y_plus).ln() / KAPPA + 7.8 * (1.0 - (-y_plus / 11.0).exp() - y_plus / 11.0 * (-y_plus / 3.0).exp())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WallForcing {
    /// Streamwise source, uniform over the domain.
    pub source: f64,
    /// `ν ∂u/∂n` at the lower and upper wall (inward normal), averaged along each wall.
    pub wall_stress: [f64; 2],
}

pub(crate) fn check_channel(d: &Domain) -> Result<()> {
    let ok = d.blocks().len() == 1
        && d.boundary_faces().iter().all(|f| f.side.axis == 1 && f.kind == FaceKind::Dirichlet)
        && d.boundary_range(0, Side::lower(1)).is_some()
        && d.boundary_range(0, Side::upper(1)).is_some();
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidInput("channel topology required: one block, walls only on ±y".into()))
    }
}

/// Uniform streamwise source balancing the discrete viscous wall drag of `velocity`.
pub fn dynamic_wall_forcing(d: &Domain, velocity: &[Vec3], boundary: &[Vec3], nu: f64) -> Result<WallForcing> {
    check_channel(d)?;
    let mut drag = 0.0;
    let mut stress = [0.0; 2];
    for (w, side) in [Side::lower(1), Side::upper(1)].into_iter().enumerate() {
        let range = d.boundary_range(0, side).expect("wall side");
        let count = range.len() as f64;
        for b in range {
            let face = &d.boundary_faces()[b];
            let a = face.metrics.alpha[1][1];
            let du = velocity[face.cell][0] - boundary[b][0];
            drag += 2.0 * nu * a * du;
            let t = face.metrics.t[1];
            stress[w] += nu * 2.0 * (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt() * du / count;
        }
    }
    Ok(WallForcing { source: drag / d.volume(), wall_stress: stress })
}

#[derive(Clone, Debug)]
pub struct ChannelInit {
    pub velocity: Vec<Vec3>,
    pub viscosity: f64,
    pub u_tau: f64,
    pub re_centerline: f64,
}

/// Reichardt mean profile for a channel with walls at `y = 0` and `y = 2δ`, plus a
/// divergence-free perturbation of relative size `amplitude`. The reference velocity is one,
/// so `ν = δ / Re_cl`; the profile's own centerline value follows from `u_τ u⁺(Re_τ)`.
pub fn reichardt_init(d: &Domain, delta: f64, re_tau: f64, amplitude: f64, seed: u64) -> Result<ChannelInit> {
    check_channel(d)?;
    let re_cl = centerline_reynolds(re_tau);
    let nu = delta / re_cl;
    let u_tau = re_tau * nu / delta;
    let mut velocity: Vec<Vec3> = d
        .centers()
        .iter()
        .map(|c| {
            let y = c[1].min(2.0 * delta - c[1]).max(0.0);
            [u_tau * reichardt(y * u_tau / nu), 0.0, 0.0]
        })
        .collect();
    if amplitude != 0.0 {
        let pert = solenoidal_perturbation(d, delta, seed);
        let peak = pert.iter().flat_map(|v| v.iter()).fold(0.0f64, |m, x| m.max(x.abs()));
        if peak > 0.0 {
            for (v, p) in velocity.iter_mut().zip(&pert) {
                for i in 0..3 {
                    v[i] += amplitude * p[i] / peak;
                }
            }
        }
    }
    Ok(ChannelInit { velocity, viscosity: nu, u_tau, re_centerline: re_cl })
}

/// Discrete curl of a random smooth potential that vanishes at the walls. Central
/// differences commute, so the result is exactly divergence-free on uniform periodic grids.
pub fn solenoidal_perturbation(d: &Domain, delta: f64, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = d.dim();
    let (lo, hi) = d.centers().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c[0]), hi.max(c[0])));
    let lx = (hi - lo).max(1e-300) * 1.01;
    let (zlo, zhi) = d.centers().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c[2]), hi.max(c[2])));
    let lz = (zhi - zlo).max(1e-300) * 1.01;
    let modes: Vec<[f64; 6]> = (0..8)
        .map(|_| {
            [
                rng.gen_range(1..=3) as f64,
                rng.gen_range(1..=2) as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]
        })
        .collect();
    let potential = |comp: usize| -> Vec<f64> {
        d.centers()
            .iter()
            .map(|c| {
                let eta = c[1] / delta - 1.0;
                let envelope = (1.0 - eta * eta).max(0.0).powi(2);
                let s: f64 = modes
                    .iter()
                    .map(|m| {
                        let kx = std::f64::consts::TAU * m[0] / lx;
                        let kz = std::f64::consts::TAU * m[1] / lz;
                        let phase = kx * c[0] + if dim == 3 { kz * c[2] } else { 0.0 } + m[2];
                        m[3 + comp] * phase.sin()
                    })
                    .sum();
                envelope * s
            })
            .collect()
    };
    let mut out = vec![ZERO3; d.n_cells()];
    if dim == 2 {
        let g = gradient(d, &potential(2));
        for (o, g) in out.iter_mut().zip(g) {
            *o = [g[1], -g[0], 0.0];
        }
    } else {
        let gx = gradient(d, &potential(0));
        let gy = gradient(d, &potential(1));
        let gz = gradient(d, &potential(2));
        for p in 0..d.n_cells() {
            out[p] = [gz[p][1] - gy[p][2], gx[p][2] - gz[p][0], gy[p][0] - gx[p][1]];
        }
    }
    out
}

/// Volume-weighted mean streamwise velocity.
pub fn bulk_velocity(d: &Domain, velocity: &[Vec3]) -> f64 {
    let flux: f64 = (0..d.n_cells()).map(|p| d.cell(p).det * velocity[p][0]).sum();
    flux / d.volume()
}
