//! Backward kernels: exact transposes of the forward kernels in [`crate::piso::kernels`].
//! Every function accumulates into its output arguments.

use crate::linalg::CsrMatrix;
use crate::math::{axpy, dot, mat_t_vec, mat_vec, scale, Vec3, ZERO3};
use crate::mesh::{Domain, Neighbor, Side};
use crate::piso::kernels::{gradient, FaceFluxes};
use crate::piso::{Discretization, Target};

/// Transpose of `cell_fluxes`.
pub fn cell_fluxes_backward(d: &Domain, d_flux: &[Vec3], d_u: &mut [Vec3]) {
    for p in 0..d.n_cells() {
        let m = d.cell(p);
        axpy(&mut d_u[p], m.det, mat_t_vec(&m.t, d_flux[p]));
    }
}

/// Transpose of `face_fluxes` with respect to the cell velocity and boundary velocity.
pub fn face_fluxes_backward(d: &Domain, d_phi: &FaceFluxes, d_u: &mut [Vec3], d_boundary: &mut [Vec3]) {
    let mut d_cell = vec![ZERO3; d.n_cells()];
    for p in 0..d.n_cells() {
        for side in Side::all(d.dim()) {
            let g = d_phi[p][side.index()];
            if g == 0.0 {
                continue;
            }
            let j = side.axis;
            match d.neighbor(p, side) {
                Neighbor::Cell(f) => {
                    d_cell[p][j] += 0.5 * g;
                    d_cell[f.cell][f.frame.perm[j]] += 0.5 * f.frame.sign[j] * g;
                }
                Neighbor::Boundary(b) => {
                    let face = &d.boundary_faces()[b];
                    axpy(&mut d_boundary[b], g * face.metrics.det, face.metrics.t[j]);
                }
            }
        }
    }
    cell_fluxes_backward(d, &d_cell, d_u);
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorInputGrad {
    pub velocity: Vec<Vec3>,
    pub boundary: Vec<Vec3>,
    pub source: Vec<Vec3>,
    pub viscosity: f64,
}

impl PredictorInputGrad {
    pub fn zeros(d: &Domain) -> Self {
        PredictorInputGrad {
            velocity: vec![ZERO3; d.n_cells()],
            boundary: vec![ZERO3; d.n_boundary_faces()],
            source: vec![ZERO3; d.n_cells()],
            viscosity: 0.0,
        }
    }
}

/// Transpose of `assemble_predictor`: maps cotangents of the matrix values and right-hand
/// side to the old velocity (through the face fluxes and the temporal term), boundary
/// velocities, source and viscosity.
pub fn assemble_predictor_backward(
    d: &Domain,
    boundary: &[Vec3],
    flux: &FaceFluxes,
    nu: f64,
    dt: f64,
    d_matrix: &[f64],
    d_rhs: &[Vec3],
    out: &mut PredictorInputGrad,
) {
    let pat = d.pattern();
    let mut d_phi = vec![[0.0; 6]; d.n_cells()];
    for p in 0..d.n_cells() {
        let inv_j = 1.0 / d.cell(p).det;
        let gd = d_matrix[pat.diag_slot[p]];
        let gr = d_rhs[p];
        axpy(&mut out.velocity[p], 1.0 / dt, gr);
        axpy(&mut out.source[p], 1.0, gr);
        for side in Side::all(d.dim()) {
            let n = side.sign();
            let j = side.axis;
            match d.neighbor(p, side) {
                Neighbor::Cell(f) => {
                    let gf = d_matrix[pat.side_slot[p][side.index()]];
                    let jf = f.frame.perm[j];
                    let a = 0.5 * (d.cell(p).alpha[j][j] + d.cell(f.cell).alpha[jf][jf]);
                    d_phi[p][side.index()] += inv_j * 0.5 * n * (gd + gf);
                    out.viscosity += inv_j * a * (gd - gf);
                }
                Neighbor::Boundary(b) => {
                    let face = &d.boundary_faces()[b];
                    let a = face.metrics.alpha[j][j];
                    let gu = dot(gr, boundary[b]);
                    out.viscosity += inv_j * 2.0 * a * (gd + gu);
                    d_phi[p][side.index()] -= inv_j * n * gu;
                    axpy(&mut out.boundary[b], inv_j * (2.0 * nu * a - n * flux[p][side.index()]), gr);
                }
            }
        }
    }
    face_fluxes_backward(d, &d_phi, &mut out.velocity, &mut out.boundary);
}

/// Transpose of `velocity_cross` in the velocity, boundary velocity and viscosity.
pub fn velocity_cross_backward(
    disc: &Discretization,
    v: &[Vec3],
    boundary: &[Vec3],
    nu: f64,
    d_r: &[Vec3],
    d_v: &mut [Vec3],
    d_boundary: &mut [Vec3],
    d_nu: &mut f64,
) {
    for t in disc.velocity_cross() {
        let g = d_r[t.row];
        match t.col {
            Target::Cell(c) => {
                axpy(&mut d_v[c], nu * t.coef, g);
                *d_nu += t.coef * dot(g, v[c]);
            }
            Target::Face(f) => {
                axpy(&mut d_boundary[f], nu * t.coef, g);
                *d_nu += t.coef * dot(g, boundary[f]);
            }
        }
    }
}

/// Transpose of `pressure_cross` in the pressure and the momentum diagonal.
pub fn pressure_cross_backward(disc: &Discretization, a: &[f64], p: &[f64], d_r: &[f64], d_p: &mut [f64], d_a: &mut [f64]) {
    for t in disc.pressure_cross() {
        if let Target::Cell(c) = t.col {
            let g = d_r[t.row];
            d_p[c] += t.coef / a[t.src] * g;
            d_a[t.src] -= t.coef * p[c] / (a[t.src] * a[t.src]) * g;
        }
    }
}

/// Transpose of `compute_h`: accumulates `∂rhs`, `∂u` and the matrix-value cotangent
/// (off-diagonal `∂H` and diagonal `∂A`).
pub fn compute_h_backward(
    c: &CsrMatrix,
    diag_slots: &[usize],
    u: &[Vec3],
    h: &[Vec3],
    d_h: &[Vec3],
    d_rhs: &mut [Vec3],
    d_u: &mut [Vec3],
    d_matrix: &mut [f64],
) {
    let cols = c.col_idx();
    let vals = c.values();
    for i in 0..c.n() {
        let q = scale(d_h[i], 1.0 / vals[diag_slots[i]]);
        if q == ZERO3 {
            continue;
        }
        axpy(&mut d_rhs[i], 1.0, q);
        d_matrix[diag_slots[i]] -= dot(q, h[i]);
        for k in c.row_range(i) {
            if k != diag_slots[i] {
                axpy(&mut d_u[cols[k]], -vals[k], q);
                d_matrix[k] -= dot(q, u[cols[k]]);
            }
        }
    }
}

/// Transpose of `divergence`.
pub fn divergence_backward(d: &Domain, d_div: &[f64], d_h: &mut [Vec3], d_boundary: &mut [Vec3]) {
    let d_phi: FaceFluxes = (0..d.n_cells())
        .map(|p| {
            let mut row = [0.0; 6];
            for s in Side::all(d.dim()) {
                row[s.index()] = s.sign() * d_div[p];
            }
            row
        })
        .collect();
    face_fluxes_backward(d, &d_phi, d_h, d_boundary);
}

/// Transpose of `assemble_pressure` with respect to the momentum diagonal.
pub fn assemble_pressure_backward(d: &Domain, a: &[f64], d_matrix: &[f64], d_a: &mut [f64]) {
    let pat = d.pattern();
    for p in 0..d.n_cells() {
        let gd = d_matrix[pat.diag_slot[p]];
        for side in Side::all(d.dim()) {
            if let Neighbor::Cell(f) = d.neighbor(p, side) {
                let w = d_matrix[pat.side_slot[p][side.index()]] - gd;
                if w == 0.0 {
                    continue;
                }
                let j = side.axis;
                let jf = f.frame.perm[j];
                d_a[p] -= 0.5 * d.cell(p).alpha[j][j] / (a[p] * a[p]) * w;
                d_a[f.cell] -= 0.5 * d.cell(f.cell).alpha[jf][jf] / (a[f.cell] * a[f.cell]) * w;
            }
        }
    }
}

/// Transpose of `computational_gradient`.
pub fn computational_gradient_backward(d: &Domain, d_g: &[Vec3], d_p: &mut [f64]) {
    for c in 0..d.n_cells() {
        for j in 0..d.dim() {
            let g = 0.5 * d_g[c][j];
            if g == 0.0 {
                continue;
            }
            for (side, s) in [(Side::upper(j), 1.0), (Side::lower(j), -1.0)] {
                let target = match d.neighbor(c, side) {
                    Neighbor::Cell(l) => l.cell,
                    Neighbor::Boundary(_) => c,
                };
                d_p[target] += s * g;
            }
        }
    }
}

/// Transpose of the physical `gradient`.
pub fn gradient_backward(d: &Domain, d_grad: &[Vec3], d_p: &mut [f64]) {
    let d_g: Vec<Vec3> = (0..d.n_cells()).map(|c| mat_vec(&d.cell(c).t, d_grad[c])).collect();
    computational_gradient_backward(d, &d_g, d_p);
}

/// Transpose of `correct_velocity` in `h`, the diagonal and the pressure.
pub fn correct_velocity_backward(d: &Domain, a: &[f64], p: &[f64], d_u: &[Vec3], d_h: &mut [Vec3], d_a: &mut [f64], d_p: &mut [f64]) {
    let g = gradient(d, p);
    let mut d_grad = vec![ZERO3; d.n_cells()];
    for c in 0..d.n_cells() {
        axpy(&mut d_h[c], 1.0, d_u[c]);
        d_a[c] += dot(g[c], d_u[c]) / (a[c] * a[c]);
        d_grad[c] = scale(d_u[c], -1.0 / a[c]);
    }
    gradient_backward(d, &d_grad, d_p);
}
