use std::fmt::Write as _;

use super::moments::MomentAccumulator;
use crate::error::{Error, Result};
use crate::math::{norm, Vec3};
use crate::mesh::{Domain, Side};
use crate::piso::channel::check_channel;

/// Wall-normal slices of a single-block channel (walls on ±y, x/z homogeneous).
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSlices {
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
    /// Global cell indices per slice.
    pub cells: Vec<Vec<usize>>,
    /// Wall positions (lower, upper).
    pub walls: [f64; 2],
}

impl ChannelSlices {
    pub fn new(d: &Domain) -> Result<Self> {
        check_channel(d)?;
        let spec = &d.blocks()[0].spec;
        let ny = spec.resolution[1];
        let mut cells = vec![Vec::new(); ny];
        for c in 0..d.n_cells() {
            cells[spec.cell_coords(c)[1]].push(c);
        }
        let y = cells.iter().map(|s| s.iter().map(|&c| d.center(c)[1]).sum::<f64>() / s.len() as f64).collect();
        let dy = cells.iter().map(|s| s.iter().map(|&c| 1.0 / norm(d.cell(c).t[1])).sum::<f64>() / s.len() as f64).collect();
        let wall = |side: Side| {
            let r = d.boundary_range(0, side).expect("wall side");
            let n = r.len() as f64;
            r.map(|b| d.boundary_faces()[b].center[1]).sum::<f64>() / n
        };
        Ok(ChannelSlices { y, dy, cells, walls: [wall(Side::lower(1)), wall(Side::upper(1))] })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Channel half height.
    pub fn delta(&self) -> f64 {
        0.5 * (self.walls[1] - self.walls[0])
    }

    /// Distance to the nearest wall.
    pub fn wall_distance(&self, slice: usize) -> f64 {
        (self.y[slice] - self.walls[0]).min(self.walls[1] - self.y[slice])
    }

    /// Slice means of one velocity component.
    pub fn mean_profile(&self, velocity: &[Vec3], component: usize) -> Vec<f64> {
        self.cells.iter().map(|s| s.iter().map(|&c| velocity[c][component]).sum::<f64>() / s.len() as f64).collect()
    }
}

/// Friction velocity and wall scalings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrictionVelocity {
    pub u_tau: f64,
    pub re_tau: f64,
    /// `|∂ū/∂y|` at the lower and upper wall.
    pub wall_gradient: [f64; 2],
}

/// `u_τ = sqrt(ν |∂ū/∂y|_wall)` from the one-sided gradient of the slice-mean streamwise
/// velocity at each wall, averaged over both walls; `Re_τ = u_τ δ / ν`.
pub fn friction_velocity(slices: &ChannelSlices, velocity: &[Vec3], wall_velocity: [f64; 2], nu: f64) -> FrictionVelocity {
    friction_velocity_from_profile(slices, &slices.mean_profile(velocity, 0), wall_velocity, nu)
}

/// [`friction_velocity`] from a precomputed slice-mean streamwise profile.
pub fn friction_velocity_from_profile(slices: &ChannelSlices, u: &[f64], wall_velocity: [f64; 2], nu: f64) -> FrictionVelocity {
    let last = u.len() - 1;
    let g0 = ((u[0] - wall_velocity[0]) / (slices.y[0] - slices.walls[0])).abs();
    let g1 = ((u[last] - wall_velocity[1]) / (slices.walls[1] - slices.y[last])).abs();
    let u_tau = (nu * 0.5 * (g0 + g1)).sqrt();
    FrictionVelocity { u_tau, re_tau: if nu > 0.0 { u_tau * slices.delta() / nu } else { f64::INFINITY }, wall_gradient: [g0, g1] }
}

/// Viscous time unit `t⁺ = t u_τ² / ν`.
pub fn t_plus(t: f64, u_tau: f64, nu: f64) -> f64 {
    t * u_tau * u_tau / nu
}

/// Eddy turnover time `t u_τ / δ`.
pub fn eddy_turnover(t: f64, u_tau: f64, delta: f64) -> f64 {
    t * u_tau / delta
}

/// Streaming per-slice statistics of velocity and pressure over frames and the homogeneous
/// directions.
#[derive(Clone, Debug)]
pub struct ChannelStatistics {
    pub slices: ChannelSlices,
    dim: usize,
    accumulators: Vec<MomentAccumulator>,
    frames: usize,
}

impl ChannelStatistics {
    /// Tracks `(u, v[, w], p)` moments up to `max_order` (≥ 2; 4 gives flatness).
    pub fn new(d: &Domain, max_order: usize) -> Result<Self> {
        let slices = ChannelSlices::new(d)?;
        let dim = d.dim();
        let acc = MomentAccumulator::new(dim + 1, max_order)?;
        Ok(ChannelStatistics { accumulators: vec![acc; slices.len()], slices, dim, frames: 0 })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn accumulator(&self, slice: usize) -> &MomentAccumulator {
        &self.accumulators[slice]
    }

    pub fn record(&mut self, velocity: &[Vec3], pressure: &[f64]) {
        let dim = self.dim;
        for (acc, cells) in self.accumulators.iter_mut().zip(&self.slices.cells) {
            let rows: Vec<Vec<f64>> = cells
                .iter()
                .map(|&c| {
                    let mut r = velocity[c][..dim].to_vec();
                    r.push(pressure[c]);
                    r
                })
                .collect();
            acc.push_batch(rows.iter().map(Vec::as_slice));
        }
        self.frames += 1;
    }

    pub fn merge(&mut self, other: &ChannelStatistics) -> Result<()> {
        if other.slices != self.slices || other.dim != self.dim {
            return Err(Error::InvalidInput("statistics over different channels".into()));
        }
        for (a, b) in self.accumulators.iter_mut().zip(&other.accumulators) {
            a.merge(b)?;
        }
        self.frames += other.frames;
        Ok(())
    }

    /// Profile with wall units from the accumulated mean streamwise velocity.
    pub fn profile(&self, nu: f64, wall_velocity: [f64; 2]) -> Result<StatsProfile> {
        let n = self.slices.len();
        let dim = self.dim;
        let mut mean = vec![[0.0; 3]; n];
        let mut cov = vec![[[0.0; 3]; 3]; n];
        let mut skewness = vec![[f64::NAN; 3]; n];
        let mut flatness = vec![[f64::NAN; 3]; n];
        for (s, acc) in self.accumulators.iter().enumerate() {
            for i in 0..dim {
                mean[s][i] = acc.mean()[i];
                for j in 0..dim {
                    cov[s][i][j] = acc.covariance(i, j)?;
                }
                if acc.max_order() >= 3 {
                    skewness[s][i] = acc.skewness(i).unwrap_or(f64::NAN);
                }
                if acc.max_order() >= 4 {
                    flatness[s][i] = acc.flatness(i).unwrap_or(f64::NAN);
                }
            }
        }
        let u: Vec<f64> = mean.iter().map(|m| m[0]).collect();
        let fv = friction_velocity_from_profile(&self.slices, &u, wall_velocity, nu);
        let y_plus = (0..n).map(|s| self.slices.wall_distance(s) * fv.u_tau / nu).collect();
        Ok(StatsProfile {
            y: self.slices.y.clone(),
            y_plus,
            mean,
            cov,
            skewness,
            flatness,
            u_tau: fv.u_tau,
            re_tau: fv.re_tau,
            nu,
            delta: self.slices.delta(),
        })
    }
}

/// Wall-normal profiles of channel statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct StatsProfile {
    pub y: Vec<f64>,
    pub y_plus: Vec<f64>,
    pub mean: Vec<Vec3>,
    pub cov: Vec<[[f64; 3]; 3]>,
    pub skewness: Vec<Vec3>,
    pub flatness: Vec<Vec3>,
    pub u_tau: f64,
    pub re_tau: f64,
    pub nu: f64,
    pub delta: f64,
}

impl StatsProfile {
    /// `U⁺ = Ū / u_τ`.
    pub fn u_plus(&self) -> Vec<f64> {
        self.mean.iter().map(|m| m[0] / self.u_tau).collect()
    }

    /// One labelled row per slice.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("y,y_plus,U,V,W,uu,vv,ww,uv,uw,vw,skew_u,skew_v,skew_w,flat_u,flat_v,flat_w\n");
        for k in 0..self.y.len() {
            let (m, c, sk, fl) = (self.mean[k], self.cov[k], self.skewness[k], self.flatness[k]);
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.y[k],
                self.y_plus[k],
                m[0],
                m[1],
                m[2],
                c[0][0],
                c[1][1],
                c[2][2],
                c[0][1],
                c[0][2],
                c[1][2],
                sk[0],
                sk[1],
                sk[2],
                fl[0],
                fl[1],
                fl[2]
            );
        }
        s
    }
}
