use std::fmt;

use thiserror::Error;

use crate::linalg::SolverReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate cell {cell} in block {block}: {reason}")]
    DegenerateCell { block: usize, cell: usize, reason: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("zero pivot in ILU0 at row {row}")]
    ZeroPivot { row: usize },
    #[error("solver did not converge in stage `{stage}`: {report}")]
    SolverFailure { stage: Stage, report: SolverReport },
    #[error("step {step}: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{file}:{line}:{column}: {message}")]
    Config { file: String, line: usize, column: usize, message: String },
    /// A statistic that is not defined for the given data (too few samples, zero norm).
    #[error("undefined statistic: {0}")]
    Undefined(String),
    #[error("field dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_step(self, step: usize) -> Self {
        Error::AtStep { step, source: Box::new(self) }
    }
}

/// Identifies the linear solve that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Predictor { component: usize },
    Pressure { corrector: usize },
    AdjointPredictor { component: usize },
    AdjointPressure { corrector: usize },
    Auxiliary,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Predictor { component } => write!(f, "predictor/component {component}"),
            Stage::Pressure { corrector } => write!(f, "pressure/corrector {corrector}"),
            Stage::AdjointPredictor { component } => write!(f, "adjoint predictor/component {component}"),
            Stage::AdjointPressure { corrector } => write!(f, "adjoint pressure/corrector {corrector}"),
            Stage::Auxiliary => f.write_str("auxiliary pressure"),
        }
    }
}
