use super::krylov::{solve, SolveOptions, SolverKind, SolverReport};
use super::CsrMatrix;

/// Adjoint of a linear solve: returns `∂b` with `Aᵀ ∂b = ∂x`. Symmetric CG systems are solved
/// directly (including the zero-mean projection for singular systems); BiCGStab systems are
/// solved against the explicit transpose.
pub fn transpose_solve(a: &CsrMatrix, grad_x: &[f64], kind: SolverKind, opts: &SolveOptions) -> (Vec<f64>, SolverReport) {
    let zero = vec![0.0; grad_x.len()];
    match kind {
        SolverKind::Cg(_) => solve(a, grad_x, &zero, kind, opts),
        SolverKind::BiCgStab(_) => solve(&a.transpose(), grad_x, &zero, kind, opts),
    }
}

/// On-pattern matrix cotangent `∂A_ij = −∂b_i x_j`.
pub fn matrix_grad(grad_b: &[f64], x: &[f64], a: &CsrMatrix) -> Vec<f64> {
    let mut out = vec![0.0; a.nnz()];
    accumulate_matrix_grad(&mut out, grad_b, x, a);
    out
}

pub fn accumulate_matrix_grad(out: &mut [f64], grad_b: &[f64], x: &[f64], a: &CsrMatrix) {
    let cols = a.col_idx();
    for i in 0..a.n() {
        let g = grad_b[i];
        if g == 0.0 {
            continue;
        }
        for k in a.row_range(i) {
            out[k] -= g * x[cols[k]];
        }
    }
}
