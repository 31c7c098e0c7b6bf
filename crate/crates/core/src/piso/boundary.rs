use super::kernels::boundary_flux;
use super::step::FlowState;
use crate::error::{Error, Result};
use crate::math::{dot, mat_vec, norm, scale, Vec3};
use crate::mesh::{Domain, FaceKind};

/// Implicit upwind update of advective-outflow faces followed by a uniform rescaling of the
/// outflow velocities so that the net boundary flux vanishes. Returns the scaling factor.
pub fn advective_outflow_update(d: &Domain, state: &mut FlowState) -> Result<f64> {
    let dt = state.dt;
    let faces = d.boundary_faces();
    let mut any = false;
    for (b, face) in faces.iter().enumerate() {
        if let FaceKind::Outflow { characteristic } = face.kind {
            any = true;
            let c = face.side.sign() * dot(face.metrics.t[face.side.axis], characteristic);
            let factor = 1.0 - 1.0 / (1.0 + 2.0 * dt * c);
            let u_p = state.velocity[face.cell];
            let u_b = state.boundary[b];
            for i in 0..3 {
                state.boundary[b][i] = u_b[i] - factor * (u_b[i] - u_p[i]);
            }
        }
    }
    if !any {
        return Ok(1.0);
    }
    balance_outflow(d, &mut state.boundary)
}

/// Rescales outflow faces so the net flux through all boundary faces is zero.
pub fn balance_outflow(d: &Domain, boundary: &mut [Vec3]) -> Result<f64> {
    let faces = d.boundary_faces();
    let (mut fixed, mut out, mut area) = (0.0, 0.0, 0.0);
    for (b, face) in faces.iter().enumerate() {
        let q = face.side.sign() * boundary_flux(face, boundary[b]);
        match face.kind {
            FaceKind::Dirichlet => fixed += q,
            FaceKind::Outflow { .. } => {
                out += q;
                area += face.metrics.det * norm(face.metrics.t[face.side.axis]);
            }
        }
    }
    if area == 0.0 {
        return if fixed.abs() > 0.0 { Err(Error::InvalidInput("no outflow area to balance the inflow".into())) } else { Ok(1.0) };
    }
    let scale_factor;
    if out.abs() > 1e-12 * fixed.abs().max(1e-300) && out * (-fixed) > 0.0 {
        scale_factor = -fixed / out;
        for (b, face) in faces.iter().enumerate() {
            if matches!(face.kind, FaceKind::Outflow { .. }) {
                boundary[b] = scale(boundary[b], scale_factor);
            }
        }
    } else {
        // No usable outflow profile yet: add a uniform normal velocity instead.
        scale_factor = f64::NAN;
        let du = (-fixed - out) / area;
        for (b, face) in faces.iter().enumerate() {
            if matches!(face.kind, FaceKind::Outflow { .. }) {
                let g = face.metrics.t[face.side.axis];
                let n = scale(g, face.side.sign() / norm(g));
                for i in 0..3 {
                    boundary[b][i] += du * n[i];
                }
            }
        }
    }
    Ok(scale_factor)
}

/// Largest stable step: `cfl_max / max_P Σ_j |T_j · u_P|`, capped at `dt_max`.
pub fn adaptive_dt(d: &Domain, velocity: &[Vec3], cfl_max: f64, dt_max: f64) -> f64 {
    let dim = d.dim();
    let peak = (0..d.n_cells()).map(|p| mat_vec(&d.cell(p).t, velocity[p])[..dim].iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    if peak == 0.0 {
        dt_max
    } else {
        (cfl_max / peak).min(dt_max)
    }
}
