use crate::error::{Error, Result};
use crate::math::{dot, norm, sub, Vec3};
use crate::mesh::{Domain, Side};
use crate::piso::kernels::gradient;

/// Vorticity from the solver's gradient operator: one component (`ω_z`) in 2D, three in 3D.
pub fn vorticity(d: &Domain, velocity: &[Vec3]) -> Vec<Vec3> {
    let comp = |i: usize| gradient(d, &velocity.iter().map(|v| v[i]).collect::<Vec<_>>());
    let (gu, gv) = (comp(0), comp(1));
    if d.dim() == 2 {
        return (0..d.n_cells()).map(|c| [0.0, 0.0, gv[c][0] - gu[c][1]]).collect();
    }
    let gw = comp(2);
    (0..d.n_cells()).map(|c| [gw[c][1] - gv[c][2], gu[c][2] - gw[c][0], gv[c][0] - gu[c][1]]).collect()
}

/// Normalized inner product of two fields.
pub fn vorticity_correlation(omega: &[f64], reference: &[f64]) -> Result<f64> {
    if omega.len() != reference.len() {
        return Err(Error::InvalidInput("vorticity fields differ in length".into()));
    }
    let (a, b) = (omega.iter().map(|x| x * x).sum::<f64>().sqrt(), reference.iter().map(|x| x * x).sum::<f64>().sqrt());
    if a == 0.0 || b == 0.0 {
        return Err(Error::Undefined("correlation with a zero field".into()));
    }
    Ok(omega.iter().zip(reference).map(|(x, y)| x * y).sum::<f64>() / (a * b))
}

/// Skin friction along one wall.
#[derive(Clone, Debug, PartialEq)]
pub struct SkinFriction {
    /// Face centers along the wall.
    pub position: Vec<Vec3>,
    pub wall_stress: Vec<f64>,
    pub cf: Vec<f64>,
}

/// `C_f = τ_w / (½ U_b²)` with `τ_w = ν ∂u/∂n` (density 1, inward normal, `u` the first
/// velocity component) from the one-sided difference between the wall face and its cell.
pub fn skin_friction(
    d: &Domain,
    velocity: &[Vec3],
    boundary: &[Vec3],
    nu: f64,
    block: usize,
    side: Side,
    bulk: f64,
) -> Result<SkinFriction> {
    if bulk == 0.0 {
        return Err(Error::Undefined("skin friction with zero bulk velocity".into()));
    }
    let range = d
        .boundary_range(block, side)
        .ok_or_else(|| Error::InvalidInput(format!("block {block} side {} is not a boundary", side.name())))?;
    let mut out = SkinFriction { position: Vec::new(), wall_stress: Vec::new(), cf: Vec::new() };
    for b in range {
        let f = &d.boundary_faces()[b];
        let t = f.metrics.t[side.axis];
        let normal = t.map(|x| -side.sign() * x / norm(t));
        let dist = dot(sub(d.center(f.cell), f.center), normal);
        let tau = nu * (velocity[f.cell][0] - boundary[b][0]) / dist;
        out.position.push(f.center);
        out.wall_stress.push(tau);
        out.cf.push(tau / (0.5 * bulk * bulk));
    }
    Ok(out)
}

/// Temporal correlation `R_ij(τ)` at zero separation from fluctuation series indexed
/// `[time][point]`, averaged over points and start times `t0 < T − τ`.
pub fn temporal_correlation(ui: &[Vec<f64>], uj: &[Vec<f64>], max_lag: usize) -> Result<Vec<f64>> {
    if ui.len() != uj.len() || ui.is_empty() {
        return Err(Error::InvalidInput("series must be non-empty and of equal length".into()));
    }
    let points = ui[0].len();
    if ui.iter().chain(uj).any(|f| f.len() != points) {
        return Err(Error::InvalidInput("series frames differ in size".into()));
    }
    if max_lag >= ui.len() {
        return Err(Error::InvalidInput(format!("lag {max_lag} needs more than {} frames", ui.len())));
    }
    let mut out = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let starts = ui.len() - lag;
        let (mut cross, mut vi, mut vj) = (0.0, 0.0, 0.0);
        for t in 0..starts {
            for x in 0..points {
                let (a, b) = (ui[t][x], uj[t + lag][x]);
                cross += a * b;
                vi += a * a;
                vj += b * b;
            }
        }
        if vi == 0.0 || vj == 0.0 {
            return Err(Error::Undefined(format!("zero variance at lag {lag}")));
        }
        out.push(cross / (vi.sqrt() * vj.sqrt()));
    }
    Ok(out)
}

/// `lag,value` rows.
pub fn correlation_csv(values: &[f64], dt: f64) -> String {
    let mut s = String::from("lag,time,value\n");
    for (k, v) in values.iter().enumerate() {
        s.push_str(&format!("{k},{},{v}\n", k as f64 * dt));
    }
    s
}
