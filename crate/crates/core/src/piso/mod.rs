//! One PISO time step: implicit momentum predictor, pressure correctors and optional
//! non-orthogonal correctors, plus boundary, time-step and channel helpers.

mod boundary;
pub mod channel;
mod discretization;
pub mod kernels;
mod step;

pub use boundary::{adaptive_dt, advective_outflow_update, balance_outflow};
pub use discretization::{CrossTerm, Discretization, Target};
pub use kernels::{FaceFluxes, PredictorSystem};
pub use step::{piso_step, CorrectorRecord, FlowState, Precision, StepConfig, StepDiagnostics, StepOutput, StepRecord};
