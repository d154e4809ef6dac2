use thiserror::Error;

use crate::model::{Action, ChainState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alpha must be < 0.5 and > 0 (got {0})")]
    InvalidAlpha(f64),

    #[error("gamma must lie in [0, 1] (got {0})")]
    InvalidGamma(f64),

    #[error("truncation must be between 1 and 10000 (got {0})")]
    InvalidTruncation(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("relative value iteration did not converge after {iterations} sweeps (span {span:e})")]
    NotConverged { iterations: usize, span: f64 },

    #[error("policy assigns infeasible action {action} at state {state}")]
    InfeasibleAction { state: ChainState, action: Action },

    #[error("policy is defined for truncation {policy} but the model uses {model}")]
    TruncationMismatch { policy: u32, model: u32 },

    #[error("degenerate evaluation: {0}")]
    Degenerate(String),

    #[error("over-paying models carry scalar terminal rewards and cannot be scored for revenue")]
    ScalarOnlyModel,
}

pub type Result<T> = std::result::Result<T, Error>;
