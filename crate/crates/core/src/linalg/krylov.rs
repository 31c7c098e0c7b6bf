use std::fmt;

use super::{CsrMatrix, Ilu0};
use crate::math::{dot_slices, l2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target `‖b − A x‖ ≤ tol · ‖b‖`.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional absolute cap on the residual norm, applied in addition to `tol`.
    pub absolute: Option<f64>,
}

impl SolveOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        SolveOptions { tol, max_iter, absolute: None }
    }

    pub fn with_absolute(mut self, abs: f64) -> Self {
        self.absolute = Some(abs);
        self
    }

    fn threshold(&self, b_norm: f64) -> f64 {
        let rel = self.tol * b_norm;
        self.absolute.map_or(rel, |a| rel.min(a))
    }
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions::new(1e-8, 2000)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverReport {
    pub iterations: usize,
    /// Final `‖b − A x‖ / ‖b‖`, recomputed from the returned solution.
    pub residual: f64,
    pub converged: bool,
    pub preconditioned: bool,
    /// Residual of the failed unpreconditioned attempt when the fallback ran.
    pub unpreconditioned_residual: Option<f64>,
}

impl fmt::Display for SolverReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations, relative residual {:.3e}{}",
            if self.converged { "converged" } else { "not converged" },
            self.iterations,
            self.residual,
            if self.preconditioned { " (ILU0)" } else { "" }
        )?;
        if let Some(r) = self.unpreconditioned_residual {
            write!(f, ", unpreconditioned residual {r:.3e}")?;
        }
        Ok(())
    }
}

/// Constant nullspace handling for singular Neumann/periodic systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nullspace {
    None,
    /// Right-hand side projected to zero mean before the solve, solution pinned to zero mean.
    Constant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Precond {
    None,
    Ilu0,
    /// Unpreconditioned first; one ILU0 retry on failure.
    Fallback,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Cg(Nullspace),
    BiCgStab(Precond),
}

pub fn solve(a: &CsrMatrix, b: &[f64], x0: &[f64], kind: SolverKind, opts: &SolveOptions) -> (Vec<f64>, SolverReport) {
    match kind {
        SolverKind::Cg(ns) => cg_solve(a, b, x0, opts, ns),
        SolverKind::BiCgStab(p) => bicgstab_solve(a, b, x0, opts, p),
    }
}

fn remove_mean(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64], r: &mut [f64]) {
    a.mul_vec_into(x, r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

fn finish(a: &CsrMatrix, b: &[f64], x: &[f64], b_norm: f64, thr: f64, iterations: usize) -> SolverReport {
    let mut r = vec![0.0; b.len()];
    residual(a, b, x, &mut r);
    let rn = l2(&r);
    SolverReport {
        iterations,
        residual: if b_norm > 0.0 { rn / b_norm } else { rn },
        converged: rn <= thr && rn.is_finite(),
        preconditioned: false,
        unpreconditioned_residual: None,
    }
}

/// Conjugate gradients for symmetric (semi)definite systems. Definite systems of either sign
/// are accepted; breakdown yields a non-converged report.
pub fn cg_solve(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: &SolveOptions, nullspace: Nullspace) -> (Vec<f64>, SolverReport) {
    debug_assert!(a.is_structurally_symmetric());
    cg_solve_op(|x, y| a.mul_vec_into(x, y), b, x0, opts, nullspace)
}

/// Matrix-free conjugate gradients; `apply(x, y)` writes `y = A x` for a symmetric operator.
pub fn cg_solve_op(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    x0: &[f64],
    opts: &SolveOptions,
    nullspace: Nullspace,
) -> (Vec<f64>, SolverReport) {
    let n = b.len();
    let mut b = b.to_vec();
    let mut x = x0.to_vec();
    if nullspace == Nullspace::Constant {
        remove_mean(&mut b);
        remove_mean(&mut x);
    }
    let b_norm = l2(&b);
    let thr = opts.threshold(b_norm);
    if b_norm == 0.0 {
        let x = vec![0.0; n];
        return (x, SolverReport { iterations: 0, residual: 0.0, converged: true, preconditioned: false, unpreconditioned_residual: None });
    }
    let residual = |x: &[f64], r: &mut [f64]| {
        apply(x, r);
        for (ri, bi) in r.iter_mut().zip(&b) {
            *ri = bi - *ri;
        }
        if nullspace == Nullspace::Constant {
            remove_mean(r);
        }
    };
    let mut r = vec![0.0; n];
    residual(&x, &mut r);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot_slices(&r, &r);
    let mut it = 0;
    let mut restarts = 0;
    while it < opts.max_iter {
        if rr.sqrt() <= thr {
            // Guard against recurrence drift before declaring success.
            residual(&x, &mut r);
            rr = dot_slices(&r, &r);
            if rr.sqrt() <= thr || restarts > 3 {
                break;
            }
            restarts += 1;
            p.copy_from_slice(&r);
        }
        apply(&p, &mut ap);
        let curv = dot_slices(&p, &ap);
        if curv == 0.0 || !curv.is_finite() {
            break;
        }
        let alpha = rr / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if nullspace == Nullspace::Constant {
            remove_mean(&mut r);
        }
        let rr_new = dot_slices(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        it += 1;
    }
    if nullspace == Nullspace::Constant {
        remove_mean(&mut x);
    }
    residual(&x, &mut r);
    let rn = l2(&r);
    let report = SolverReport {
        iterations: it,
        residual: rn / b_norm,
        converged: rn <= thr && rn.is_finite(),
        preconditioned: false,
        unpreconditioned_residual: None,
    };
    (x, report)
}

fn bicgstab_inner(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: &SolveOptions, ilu: Option<&Ilu0>) -> (Vec<f64>, SolverReport) {
    let n = a.n();
    let b_norm = l2(b);
    let thr = opts.threshold(b_norm);
    if b_norm == 0.0 {
        return (
            vec![0.0; n],
            SolverReport { iterations: 0, residual: 0.0, converged: true, preconditioned: ilu.is_some(), unpreconditioned_residual: None },
        );
    }
    let precond = |src: &[f64], dst: &mut [f64]| match ilu {
        Some(m) => m.apply(src, dst),
        None => dst.copy_from_slice(src),
    };
    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    residual(a, b, &x, &mut r);
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut it = 0;
    let mut restarts = 0;
    while it < opts.max_iter {
        if l2(&r) <= thr {
            residual(a, b, &x, &mut r);
            if l2(&r) <= thr || restarts > 3 {
                break;
            }
            restarts += 1;
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }
        it += 1;
        let rho_new = dot_slices(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        a.mul_vec_into(&y, &mut v);
        let denom = dot_slices(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if l2(&s) <= thr {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            r.copy_from_slice(&s);
            continue;
        }
        precond(&s, &mut z);
        a.mul_vec_into(&z, &mut t);
        let tt = dot_slices(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            break;
        }
        omega = dot_slices(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega == 0.0 {
            break;
        }
    }
    let mut report = finish(a, b, &x, b_norm, thr, it);
    report.preconditioned = ilu.is_some();
    (x, report)
}

/// Stabilized bi-conjugate gradients with optional ILU0 right preconditioning.
pub fn bicgstab_solve(a: &CsrMatrix, b: &[f64], x0: &[f64], opts: &SolveOptions, precond: Precond) -> (Vec<f64>, SolverReport) {
    let with_ilu = |x0: &[f64]| match Ilu0::factor(a) {
        Ok(f) => bicgstab_inner(a, b, x0, opts, Some(&f)),
        Err(_) => {
            let (x, mut rep) = bicgstab_inner(a, b, x0, opts, None);
            rep.converged = false;
            (x, rep)
        }
    };
    match precond {
        Precond::None => bicgstab_inner(a, b, x0, opts, None),
        Precond::Ilu0 => with_ilu(x0),
        Precond::Fallback => {
            let (x, rep) = bicgstab_inner(a, b, x0, opts, None);
            if rep.converged {
                return (x, rep);
            }
            let (x2, mut rep2) = with_ilu(x0);
            rep2.preconditioned = true;
            rep2.unpreconditioned_residual = Some(rep.residual);
            (x2, rep2)
        }
    }
}
