//! Differentiable PISO solver for incompressible flow on multi-block structured grids.
//!
//! The crate covers mesh construction and metrics ([`mesh`]), sparse solvers and their
//! adjoints ([`linalg`]), the forward time step ([`piso`]), reverse-mode gradients through
//! recorded steps ([`adjoint`]), streaming turbulence statistics ([`stats`]), benchmark case
//! drivers ([`cases`]) and configuration/field I/O ([`io`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod adjoint;
pub mod cases;
pub mod error;
pub mod io;
pub mod linalg;
pub mod math;
pub mod mesh;
pub mod piso;
pub mod stats;

pub use error::{Error, Result, Stage};
pub use math::{Mat3, Vec3};
