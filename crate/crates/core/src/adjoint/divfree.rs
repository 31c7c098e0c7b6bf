use crate::error::{Error, Result, Stage};
use crate::linalg::{cg_solve_op, Nullspace, SolveOptions, SolverReport};
use crate::math::{axpy, scale, Vec3, ZERO3};
use crate::mesh::Domain;
use crate::piso::kernels::{divergence, gradient};

/// Output of [`div_free_grad_mod`].
#[derive(Clone, Debug)]
pub struct DivFreeCorrection {
    /// `∂ + λ W⁻¹∇p`.
    pub gradient: Vec<Vec3>,
    /// Auxiliary pressure (zero mean).
    pub pressure: Vec<f64>,
    /// Candidate with the correction applied, `u − W⁻¹∇p`.
    pub projected: Vec<Vec3>,
    pub report: SolverReport,
}

/// Cell-integrated divergence with zero boundary flux.
pub fn interior_divergence(d: &Domain, u: &[Vec3]) -> Vec<f64> {
    divergence(d, u, &vec![ZERO3; d.n_boundary_faces()])
}

/// Adds a divergence-reducing direction to a velocity cotangent.
///
/// Solves `D W⁻¹ G p = D u` for the candidate velocity `u` (`D` the face-flux divergence with
/// closed boundaries, `G` the discrete physical gradient, `W` per-cell weights, unit when
/// `None`) and returns `∂ + λ W⁻¹ G p`. The operator is symmetric negative semidefinite, so
/// the solve uses matrix-free CG on its negation; `projected` has divergence bounded by the
/// solver residual.
pub fn div_free_grad_mod(
    d: &Domain,
    candidate: &[Vec3],
    grad: &[Vec3],
    weights: Option<&[f64]>,
    lambda: f64,
    opts: &SolveOptions,
) -> Result<DivFreeCorrection> {
    let n = d.n_cells();
    if candidate.len() != n || grad.len() != n || weights.is_some_and(|w| w.len() != n) {
        return Err(Error::InvalidInput("field shape does not match the domain".into()));
    }
    let inv_w: Vec<f64> = match weights {
        Some(w) => {
            if w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::InvalidInput("weights must be positive".into()));
            }
            w.iter().map(|x| 1.0 / x).collect()
        }
        None => vec![1.0; n],
    };
    let weighted_grad = |p: &[f64]| -> Vec<Vec3> { gradient(d, p).iter().zip(&inv_w).map(|(g, w)| scale(*g, *w)).collect() };
    let neg_l = |p: &[f64], out: &mut [f64]| {
        let div = interior_divergence(d, &weighted_grad(p));
        out.iter_mut().zip(div).for_each(|(o, v)| *o = -v);
    };
    let rhs: Vec<f64> = interior_divergence(d, candidate).iter().map(|v| -v).collect();
    let (p, report) = cg_solve_op(neg_l, &rhs, &vec![0.0; n], opts, Nullspace::Constant);
    if !report.converged {
        return Err(Error::SolverFailure { stage: Stage::Auxiliary, report });
    }
    let corr = weighted_grad(&p);
    let mut projected = candidate.to_vec();
    let mut out = grad.to_vec();
    for i in 0..n {
        axpy(&mut projected[i], -1.0, corr[i]);
        if lambda != 0.0 {
            axpy(&mut out[i], lambda, corr[i]);
        }
    }
    Ok(DivFreeCorrection { gradient: out, pressure: p, projected, report })
}
