//! Forward kernels of one PISO step. Momentum rows are per unit volume; pressure rows and
//! divergences are cell-integrated flux sums.

use super::discretization::{Discretization, Target};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;
use crate::math::{axpy, dot, mat_t_vec, mat_vec, scale, sub, Vec3, ZERO3};
use crate::mesh::{BoundaryFace, Domain, Neighbor, Side};

/// Face fluxes per cell and side (`Side::index`), oriented along the positive axis of the
/// owning cell's frame.
pub type FaceFluxes = Vec<[f64; 6]>;

/// Contravariant fluxes `U^j = J T_j · u` per cell.
pub fn cell_fluxes(d: &Domain, u: &[Vec3]) -> Vec<Vec3> {
    (0..d.n_cells())
        .map(|p| {
            let m = d.cell(p);
            scale(mat_vec(&m.t, u[p]), m.det)
        })
        .collect()
}

#[inline]
pub fn boundary_flux(face: &BoundaryFace, u_b: Vec3) -> f64 {
    face.metrics.det * dot(face.metrics.t[face.side.axis], u_b)
}

/// Interior faces take the mean of the adjacent cell fluxes; boundary faces use the face
/// metrics and the boundary velocity.
pub fn face_fluxes(d: &Domain, u: &[Vec3], boundary: &[Vec3]) -> FaceFluxes {
    let cell = cell_fluxes(d, u);
    let mut out = vec![[0.0; 6]; d.n_cells()];
    for p in 0..d.n_cells() {
        for side in Side::all(d.dim()) {
            let j = side.axis;
            out[p][side.index()] = match d.neighbor(p, side) {
                Neighbor::Cell(f) => 0.5 * (cell[p][j] + f.frame.sign[j] * cell[f.cell][f.frame.perm[j]]),
                Neighbor::Boundary(b) => boundary_flux(&d.boundary_faces()[b], boundary[b]),
            };
        }
    }
    out
}

#[derive(Clone, Debug)]
pub struct PredictorSystem {
    pub matrix: CsrMatrix,
    /// Right-hand side without the deferred cross-diffusion terms.
    pub rhs: Vec<Vec3>,
}

/// Face-interpolated diagonal metric `⟨α_jj⟩_f` between `p` and a neighbor.
#[inline]
fn face_alpha(d: &Domain, p: usize, side: Side, f: crate::mesh::Link) -> f64 {
    let j = side.axis;
    let fa = d.cell(f.cell).alpha[f.frame.perm[j]][f.frame.perm[j]];
    0.5 * (d.cell(p).alpha[j][j] + fa)
}

/// Implicit advection-diffusion matrix `C` and its right-hand side.
pub fn assemble_predictor(
    d: &Domain,
    u_n: &[Vec3],
    boundary: &[Vec3],
    flux: &FaceFluxes,
    nu: f64,
    dt: f64,
    source: &[Vec3],
) -> Result<PredictorSystem> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidInput(format!("time step must be positive, got {dt}")));
    }
    let pat = d.pattern();
    let mut c = pat.zeros();
    let mut rhs = Vec::with_capacity(d.n_cells());
    let vals = c.values_mut();
    for p in 0..d.n_cells() {
        let inv_j = 1.0 / d.cell(p).det;
        let mut diag = 1.0 / dt;
        let mut r = scale(u_n[p], 1.0 / dt);
        if !source.is_empty() {
            r = crate::math::add(r, source[p]);
        }
        for side in Side::all(d.dim()) {
            let n = side.sign();
            let phi = flux[p][side.index()];
            match d.neighbor(p, side) {
                Neighbor::Cell(f) => {
                    let a = face_alpha(d, p, side, f);
                    diag += inv_j * (0.5 * n * phi + nu * a);
                    vals[pat.side_slot[p][side.index()]] += inv_j * (0.5 * n * phi - nu * a);
                }
                Neighbor::Boundary(b) => {
                    let face = &d.boundary_faces()[b];
                    let a = face.metrics.alpha[side.axis][side.axis];
                    diag += inv_j * 2.0 * nu * a;
                    axpy(&mut r, inv_j * (2.0 * nu * a - n * phi), boundary[b]);
                }
            }
        }
        vals[pat.diag_slot[p]] += diag;
        rhs.push(r);
    }
    Ok(PredictorSystem { matrix: c, rhs })
}

/// Deferred cross-diffusion `ν · R(v, u_b)` of the momentum equation.
pub fn velocity_cross(disc: &Discretization, v: &[Vec3], boundary: &[Vec3], nu: f64) -> Vec<Vec3> {
    let mut out = vec![ZERO3; v.len()];
    for t in disc.velocity_cross() {
        let val = match t.col {
            Target::Cell(c) => v[c],
            Target::Face(f) => boundary[f],
        };
        axpy(&mut out[t.row], nu * t.coef, val);
    }
    out
}

/// Deferred cross-flux terms of the pressure equation for pressure `p` and diagonal `a`.
pub fn pressure_cross(disc: &Discretization, a: &[f64], p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len()];
    for t in disc.pressure_cross() {
        if let Target::Cell(c) = t.col {
            out[t.row] += t.coef / a[t.src] * p[c];
        }
    }
    out
}

/// Off-diagonal product `H u` with `H = C − diag(C)`.
pub fn offdiag_apply(c: &CsrMatrix, diag_slots: &[usize], u: &[Vec3]) -> Vec<Vec3> {
    let cols = c.col_idx();
    let vals = c.values();
    (0..c.n())
        .map(|i| {
            let mut acc = ZERO3;
            for k in c.row_range(i) {
                if k != diag_slots[i] {
                    axpy(&mut acc, vals[k], u[cols[k]]);
                }
            }
            acc
        })
        .collect()
}

/// `h = A⁻¹ (rhs − H u)`.
pub fn compute_h(c: &CsrMatrix, diag_slots: &[usize], rhs: &[Vec3], u: &[Vec3]) -> Vec<Vec3> {
    let hu = offdiag_apply(c, diag_slots, u);
    (0..c.n()).map(|i| scale(sub(rhs[i], hu[i]), 1.0 / c.values()[diag_slots[i]])).collect()
}

/// Cell-integrated divergence: face-interpolated fluxes of `h`, boundary faces carrying the
/// boundary velocity flux.
pub fn divergence(d: &Domain, h: &[Vec3], boundary: &[Vec3]) -> Vec<f64> {
    face_fluxes(d, h, boundary).iter().map(|row| Side::all(d.dim()).map(|s| s.sign() * row[s.index()]).sum()).collect()
}

/// Pressure matrix from the momentum diagonal: off-diagonals `⟨α_jj A⁻¹⟩_f`, diagonal the
/// negative row sum. Boundary faces carry no pressure flux.
pub fn assemble_pressure(d: &Domain, a: &[f64]) -> Result<CsrMatrix> {
    if let Some(i) = a.iter().position(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput(format!("momentum diagonal not positive at cell {i} ({})", a[i])));
    }
    let pat = d.pattern();
    let mut m = pat.zeros();
    let vals = m.values_mut();
    for p in 0..d.n_cells() {
        let mut diag = 0.0;
        for side in Side::all(d.dim()) {
            if let Neighbor::Cell(f) = d.neighbor(p, side) {
                let j = side.axis;
                let jf = f.frame.perm[j];
                let w = 0.5 * (d.cell(p).alpha[j][j] / a[p] + d.cell(f.cell).alpha[jf][jf] / a[f.cell]);
                vals[pat.side_slot[p][side.index()]] += w;
                diag -= w;
            }
        }
        vals[pat.diag_slot[p]] += diag;
    }
    Ok(m)
}

/// Central computational-space differences `0.5 (p₊ − p₋)`, a missing neighbor taking the
/// cell's own value.
pub fn computational_gradient(d: &Domain, p: &[f64]) -> Vec<Vec3> {
    (0..d.n_cells())
        .map(|c| {
            let mut g = ZERO3;
            for j in 0..d.dim() {
                let val = |side| match d.neighbor(c, side) {
                    Neighbor::Cell(l) => p[l.cell],
                    Neighbor::Boundary(_) => p[c],
                };
                g[j] = 0.5 * (val(Side::upper(j)) - val(Side::lower(j)));
            }
            g
        })
        .collect()
}

/// Physical gradient `Tᵀ ∇_ξ p` of a cell scalar.
pub fn gradient(d: &Domain, p: &[f64]) -> Vec<Vec3> {
    computational_gradient(d, p).into_iter().enumerate().map(|(c, g)| mat_t_vec(&d.cell(c).t, g)).collect()
}

/// `u = h − A⁻¹ ∇p`.
pub fn correct_velocity(d: &Domain, h: &[Vec3], a: &[f64], p: &[f64]) -> Vec<Vec3> {
    gradient(d, p).into_iter().enumerate().map(|(c, g)| sub(h[c], scale(g, 1.0 / a[c]))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::periodic_box;

    #[test]
    fn uniform_flow_fluxes() {
        let d = periodic_box(2, [3, 3, 1], [3.0, 3.0, 1.0], [true, true, false]).unwrap();
        let u = vec![[1.0, 0.0, 0.0]; 9];
        let f = face_fluxes(&d, &u, &[]);
        for row in f {
            assert_eq!(row[0], 1.0);
            assert_eq!(row[1], 1.0);
            assert_eq!(row[2], 0.0);
        }
    }

    #[test]
    fn zero_state_predictor_is_temporal_only() {
        let d = periodic_box(2, [3, 2, 1], [3.0, 2.0, 1.0], [false; 3]).unwrap();
        let u = vec![ZERO3; 6];
        let b = vec![ZERO3; d.n_boundary_faces()];
        let f = face_fluxes(&d, &u, &b);
        let s: Vec<Vec3> = (0..6).map(|i| [i as f64, 1.0, 0.0]).collect();
        let sys = assemble_predictor(&d, &u, &b, &f, 0.0, 0.5, &s).unwrap();
        let dense = sys.matrix.to_dense();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(dense[i][j], if i == j { 2.0 } else { 0.0 });
            }
            assert_eq!(sys.rhs[i], s[i]);
        }
    }

    #[test]
    fn nonpositive_dt_rejected() {
        let d = periodic_box(2, [2, 2, 1], [1.0; 3], [false; 3]).unwrap();
        let z = vec![ZERO3; 4];
        let b = vec![ZERO3; d.n_boundary_faces()];
        let f = face_fluxes(&d, &z, &b);
        assert!(assemble_predictor(&d, &z, &b, &f, 1.0, 0.0, &[]).is_err());
    }

    #[test]
    fn linear_pressure_gradient_is_exact() {
        let d = periodic_box(2, [5, 4, 1], [5.0, 4.0, 1.0], [false; 3]).unwrap();
        let p: Vec<f64> = d.centers().iter().map(|c| c[0]).collect();
        let g = gradient(&d, &p);
        for c in 0..d.n_cells() {
            let (_, local) = d.locate(c);
            let i = local % 5;
            if i > 0 && i < 4 {
                assert!((g[c][0] - 1.0).abs() < 1e-14);
            }
            assert!(g[c][1].abs() < 1e-14);
        }
    }
}
