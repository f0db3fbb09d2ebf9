//! Inertial hybrid proximal-extragradient (HPE) methods for monotone inclusions
//! `0 ∈ F(z) + B(z)`, with the proximal point, Tseng and forward-backward
//! instances, ergodic averaging, invariant checks and complexity bounds.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod ergodic;
pub mod hpe;
pub mod instances;
pub mod linalg;
pub mod operators;
pub mod params;

use thiserror::Error;

pub use bounds::{BoundError, BoundInputs, BoundReport};
pub use ergodic::{ErgodicError, ErgodicPoint, ErgodicState};
pub use hpe::{
    Certificate, HpeError, InnerSolver, IterationRecord, RunOptions, SolverState, StopMode, StoppingRule, Trace,
    TraceError, TraceHeader, Verdict,
};
pub use instances::{Instance, InstanceConfig, InstanceError, InstanceKind, LambdaRule};
pub use linalg::{LinalgError, VectorH};
pub use operators::{AffineOperator, Backward, ForwardMap, OracleError, ProblemKind, TestProblem};
pub use params::{AlphaSchedule, HpeParams, ParamError};

/// Any error raised by this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Hpe(#[from] HpeError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Ergodic(#[from] ErgodicError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}
