mod support;

use nalgebra::{DMatrix, DVector};
use piso_core::linalg::{
    bicgstab_solve, cg_solve, matrix_grad, solve, transpose_solve, CsrMatrix, Ilu0, Nullspace, Precond, SolveOptions, SolverKind,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{dot, random_vec, rel};

/// 2D five-point stencil on an `n × n` grid, with a random advective skew when `skew > 0`.
fn stencil(n: usize, skew: f64, shift: f64, seed: u64) -> CsrMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    let id = |i: usize, j: usize| i + n * j;
    for j in 0..n {
        for i in 0..n {
            let p = id(i, j);
            let mut diag = shift;
            let nbrs = [
                (i > 0).then(|| id(i - 1, j)),
                (i + 1 < n).then(|| id(i + 1, j)),
                (j > 0).then(|| id(i, j - 1)),
                (j + 1 < n).then(|| id(i, j + 1)),
            ];
            for q in nbrs.into_iter().flatten() {
                let a = -1.0 + skew * rng.gen_range(-1.0..1.0);
                t.push((p, q, a));
                diag += 1.0;
            }
            t.push((p, p, diag));
        }
    }
    CsrMatrix::from_triplets(n * n, &t).unwrap()
}

fn dense(a: &CsrMatrix) -> DMatrix<f64> {
    let d = a.to_dense();
    DMatrix::from_fn(a.n(), a.n(), |i, j| d[i][j])
}

fn lu_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    dense(a).lu().solve(&DVector::from_column_slice(b)).expect("nonsingular").as_slice().to_vec()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn cg_matches_dense_lu() {
    let a = stencil(7, 0.0, 0.3, 1);
    let b = random_vec(&mut ChaCha8Rng::seed_from_u64(2), a.n());
    let (x, rep) = cg_solve(&a, &b, &vec![0.0; a.n()], &SolveOptions::new(1e-13, 1000), Nullspace::None);
    assert!(rep.converged, "{rep}");
    assert!(max_diff(&x, &lu_solve(&a, &b)) < 1e-10);
}

#[test]
fn bicgstab_matches_dense_lu_with_every_preconditioner() {
    let a = stencil(7, 0.6, 0.5, 3);
    assert!(!a.is_symmetric(1e-12));
    let b = random_vec(&mut ChaCha8Rng::seed_from_u64(4), a.n());
    let exact = lu_solve(&a, &b);
    for p in [Precond::None, Precond::Ilu0, Precond::Fallback] {
        let (x, rep) = bicgstab_solve(&a, &b, &vec![0.0; a.n()], &SolveOptions::new(1e-13, 1000), p);
        assert!(rep.converged, "{p:?}: {rep}");
        assert!(max_diff(&x, &exact) < 1e-10, "{p:?}");
    }
}

#[test]
fn singular_neumann_system_gives_zero_mean_solution() {
    let a = stencil(6, 0.0, 0.0, 5);
    let mut b = random_vec(&mut ChaCha8Rng::seed_from_u64(6), a.n());
    let mean = b.iter().sum::<f64>() / b.len() as f64;
    let (x, rep) = cg_solve(&a, &b, &vec![0.0; a.n()], &SolveOptions::new(1e-12, 1000), Nullspace::Constant);
    assert!(rep.converged, "{rep}");
    assert!(x.iter().sum::<f64>().abs() < 1e-10);
    b.iter_mut().for_each(|v| *v -= mean);
    assert!(max_diff(&a.mul_vec(&x), &b) < 1e-10);
}

#[test]
fn ilu0_is_exact_without_fill() {
    // Tridiagonal factors have no fill-in, so ILU0 is the exact LU.
    let n = 9;
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, 4.0 + i as f64 * 0.1));
        if i > 0 {
            t.push((i, i - 1, -1.3));
        }
        if i + 1 < n {
            t.push((i, i + 1, -0.7));
        }
    }
    let a = CsrMatrix::from_triplets(n, &t).unwrap();
    let ilu = Ilu0::factor(&a).unwrap();
    let r = random_vec(&mut ChaCha8Rng::seed_from_u64(7), n);
    let mut z = vec![0.0; n];
    ilu.apply(&r, &mut z);
    assert!(max_diff(&z, &lu_solve(&a, &r)) < 1e-13);
}

#[test]
fn non_convergence_is_reported() {
    let a = stencil(8, 0.0, 0.0, 8);
    let b = random_vec(&mut ChaCha8Rng::seed_from_u64(9), a.n());
    let (_, rep) = bicgstab_solve(&a, &b, &vec![0.0; a.n()], &SolveOptions::new(1e-14, 2), Precond::None);
    assert!(!rep.converged);
    assert_eq!(rep.iterations, 2);
}

#[test]
fn transpose_solve_dot_product_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let opts = SolveOptions::new(1e-13, 2000);
    let cases =
        [(stencil(6, 0.8, 0.4, 11), SolverKind::BiCgStab(Precond::Fallback)), (stencil(6, 0.0, 0.2, 12), SolverKind::Cg(Nullspace::None))];
    for (a, kind) in cases {
        let n = a.n();
        let (v, gx, b) = (random_vec(&mut rng, n), random_vec(&mut rng, n), random_vec(&mut rng, n));
        let zero = vec![0.0; n];
        let (jv, _) = solve(&a, &v, &zero, kind, &opts);
        let (gb, _) = transpose_solve(&a, &gx, kind, &opts);
        assert!(rel(dot(&gx, &jv), dot(&gb, &v)) < 1e-9);
        // Matrix cotangent against the directional derivative −A⁻¹ δA x.
        let (x, _) = solve(&a, &b, &zero, kind, &opts);
        let delta = random_vec(&mut rng, a.nnz());
        let delta = if matches!(kind, SolverKind::Cg(_)) { symmetrize(&a, &delta) } else { delta };
        let (jd, _) = solve(&a, &a.with_values(delta.clone()).mul_vec(&x), &zero, kind, &opts);
        assert!(rel(-dot(&gx, &jd), dot(&matrix_grad(&gb, &x, &a), &delta)) < 1e-9);
    }
}

fn symmetrize(a: &CsrMatrix, v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    for i in 0..a.n() {
        for k in a.row_range(i) {
            let j = a.col_idx()[k];
            if j > i {
                out[a.slot(j, i).unwrap()] = v[k];
            }
        }
    }
    out
}

#[test]
fn malformed_csr_is_rejected() {
    assert!(CsrMatrix::new(2, vec![0, 1, 2], vec![0, 2], vec![1.0, 1.0]).is_err());
    assert!(CsrMatrix::new(2, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transpose_is_an_involution_and_adjoint(seed in 0u64..1000, n in 2usize..6, skew in 0.0f64..1.0) {
        let a = stencil(n, skew, 0.5, seed);
        prop_assert_eq!(a.transpose().transpose(), a.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let (x, y) = (random_vec(&mut rng, a.n()), random_vec(&mut rng, a.n()));
        prop_assert!((dot(&y, &a.mul_vec(&x)) - dot(&a.transpose().mul_vec(&y), &x)).abs() < 1e-12);
    }

    #[test]
    fn solves_meet_their_residual_postcondition(seed in 0u64..1000, skew in 0.0f64..0.9, tol in 1e-12f64..1e-6) {
        let a = stencil(5, skew, 0.2, seed);
        let b = random_vec(&mut ChaCha8Rng::seed_from_u64(seed + 1), a.n());
        let (x, rep) = bicgstab_solve(&a, &b, &vec![0.0; a.n()], &SolveOptions::new(tol, 500), Precond::Fallback);
        prop_assert!(rep.converged);
        let r: Vec<f64> = a.mul_vec(&x).iter().zip(&b).map(|(ax, bi)| bi - ax).collect();
        prop_assert!(dot(&r, &r).sqrt() <= tol * dot(&b, &b).sqrt() * (1.0 + 1e-9));
    }
}
