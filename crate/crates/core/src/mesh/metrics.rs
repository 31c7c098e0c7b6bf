//! Per-cell and per-boundary-face transformation metrics.
//!
//! `jacobian[i][j] = ∂x_i/∂ξ_j`, `t = jacobian⁻¹` (so `t[j]` is the gradient of ξ_j),
//! `det = det(jacobian)` and `alpha[j][k] = det · t[j]·t[k]`.

use super::block::{BlockSpec, Side};
use crate::error::{Error, Result};
use crate::math::{add, dot, inverse_positive, scale, sub, Mat3, Vec3, ZERO3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointMetrics {
    pub jacobian: Mat3,
    pub t: Mat3,
    pub det: f64,
    pub alpha: Mat3,
}

impl PointMetrics {
    pub fn from_jacobian(jacobian: Mat3) -> Option<Self> {
        let (t, det) = inverse_positive(&jacobian)?;
        let mut alpha = [[0.0; 3]; 3];
        for j in 0..3 {
            for k in j..3 {
                let v = det * dot(t[j], t[k]);
                alpha[j][k] = v;
                alpha[k][j] = v;
            }
        }
        Some(PointMetrics { jacobian, t, det, alpha })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceMetrics {
    pub center: Vec3,
    pub metrics: PointMetrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransformMetrics {
    pub dim: usize,
    pub centers: Vec<Vec3>,
    pub cells: Vec<PointMetrics>,
    /// Boundary-face metrics per side (indexed by `Side::index`), in block face order.
    pub faces: Vec<Vec<FaceMetrics>>,
}

/// Mean of the cell's vertices, optionally restricted to one face (`axis`, upper?).
fn corner_mean(block: &BlockSpec, c: [usize; 3], face: Option<Side>) -> Vec3 {
    let dim = block.dim;
    let mut sum = ZERO3;
    let mut count = 0usize;
    for corner in 0..(1usize << dim) {
        let mut v = c;
        let mut keep = true;
        for a in 0..dim {
            let bit = (corner >> a) & 1;
            if let Some(s) = face {
                if s.axis == a && bit != usize::from(s.positive) {
                    keep = false;
                }
            }
            v[a] += bit;
        }
        if keep {
            sum = add(sum, block.vertex(v));
            count += 1;
        }
    }
    scale(sum, 1.0 / count as f64)
}

fn cell_center(block: &BlockSpec, c: [usize; 3]) -> Vec3 {
    corner_mean(block, c, None)
}

/// Tangential derivative of a face along `axis`: mean of upper vertices minus mean of lower.
fn face_tangent(block: &BlockSpec, c: [usize; 3], side: Side, axis: usize) -> Vec3 {
    let dim = block.dim;
    let mut upper = ZERO3;
    let mut lower = ZERO3;
    for corner in 0..(1usize << dim) {
        if (corner >> side.axis) & 1 != usize::from(side.positive) {
            continue;
        }
        let mut v = c;
        for a in 0..dim {
            v[a] += (corner >> a) & 1;
        }
        if (corner >> axis) & 1 == 1 {
            upper = add(upper, block.vertex(v));
        } else {
            lower = add(lower, block.vertex(v));
        }
    }
    let n = (1usize << (dim - 2)) as f64;
    scale(sub(upper, lower), 1.0 / n)
}

fn embed_2d(mut m: Mat3, dim: usize) -> Mat3 {
    if dim == 2 {
        m[2] = [0.0, 0.0, 1.0];
        m[0][2] = 0.0;
        m[1][2] = 0.0;
    }
    m
}

fn set_column(m: &mut Mat3, col: usize, v: Vec3) {
    for (i, row) in m.iter_mut().enumerate() {
        row[col] = v[i];
    }
}

/// Computes metrics for every cell and boundary face of `block`.
///
/// Cell Jacobian columns are differences of face-position estimates: the midpoint of adjacent
/// cell centers inside the block and the true face center at block edges. On tensor-product
/// grids the determinants therefore sum to the exact block volume.
pub fn compute_metrics(block: &BlockSpec, block_id: usize) -> Result<TransformMetrics> {
    let dim = block.dim;
    let n = block.n_cells();
    let centers: Vec<Vec3> = (0..n).map(|i| cell_center(block, block.cell_coords(i))).collect();

    let mut cells = Vec::with_capacity(n);
    for i in 0..n {
        let c = block.cell_coords(i);
        let mut jac = [[0.0; 3]; 3];
        for a in 0..dim {
            let face_pos = |side: Side| -> Vec3 {
                if block.on_side(side, c) {
                    corner_mean(block, c, Some(side))
                } else {
                    let mut nb = c;
                    if side.positive {
                        nb[a] += 1;
                    } else {
                        nb[a] -= 1;
                    }
                    scale(add(centers[i], centers[block.cell_index(nb)]), 0.5)
                }
            };
            set_column(&mut jac, a, sub(face_pos(Side::upper(a)), face_pos(Side::lower(a))));
        }
        let jac = embed_2d(jac, dim);
        let m = PointMetrics::from_jacobian(jac).ok_or_else(|| Error::DegenerateCell {
            block: block_id,
            cell: i,
            reason: format!("non-invertible Jacobian (det {:.3e})", crate::math::det(&jac)),
        })?;
        cells.push(m);
    }

    let mut faces = vec![Vec::new(); 2 * dim];
    for side in Side::all(dim) {
        let count = block.face_count(side);
        let mut list = Vec::with_capacity(count);
        for f in 0..count {
            let c = block.face_cell(side, f);
            let center = corner_mean(block, c, Some(side));
            let mut jac = [[0.0; 3]; 3];
            for a in 0..dim {
                let col = if a == side.axis {
                    scale(sub(center, centers[block.cell_index(c)]), 2.0 * side.sign())
                } else {
                    face_tangent(block, c, side, a)
                };
                set_column(&mut jac, a, col);
            }
            let jac = embed_2d(jac, dim);
            let metrics = PointMetrics::from_jacobian(jac).ok_or_else(|| Error::DegenerateCell {
                block: block_id,
                cell: block.cell_index(c),
                reason: format!("degenerate boundary face on side {}", side.name()),
            })?;
            list.push(FaceMetrics { center, metrics });
        }
        faces[side.index()] = list;
    }
    Ok(TransformMetrics { dim, centers, cells, faces })
}
