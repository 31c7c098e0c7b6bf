//! Reverse-mode differentiation of the PISO step.
//!
//! Each linear solve is differentiated through its transposed system, so the backward pass
//! costs roughly one forward step. Gradient paths restrict which solve Jacobians are
//! propagated.

pub mod check;
mod divfree;
pub mod kernels;
mod step;
mod tape;

pub use check::{gradcheck_suite, GradCheckReport, GRADCHECK_THRESHOLD};
pub use divfree::{div_free_grad_mod, interior_divergence, DivFreeCorrection};
pub use step::{backward_step, backward_step_decomposed, GradientPath, PathDecomposition, StateGrad};
pub use tape::{backward_rollout, rollout, Rollout};
