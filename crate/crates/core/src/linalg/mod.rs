//! Sparse matrices, Krylov solvers, ILU(0) preconditioning and linear-solve adjoints.

mod adjoint;
mod csr;
mod ilu;
mod krylov;

pub use adjoint::{accumulate_matrix_grad, matrix_grad, transpose_solve};
pub use csr::CsrMatrix;
pub use ilu::Ilu0;
pub use krylov::{bicgstab_solve, cg_solve, cg_solve_op, solve, Nullspace, Precond, SolveOptions, SolverKind, SolverReport};
