use std::path::PathBuf;

use thiserror::Error;

use crate::kernels::FluidState;

pub type Result<T, E = SedError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SedError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A sample or particle left the computational box.
    #[error("domain exhausted: {0}")]
    DomainExhausted(String),

    /// A fixed-point or scaling iteration hit its iteration cap.
    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    /// Brinkman iteration failed; the last iterate is kept so the caller can decide.
    #[error("Brinkman iteration did not converge (residual {:.3e})", .0.residual)]
    BrinkmanNotConverged(Box<FluidState>),

    #[error("particles {i} and {j} touched at t = {time} (distance {distance:.3e} <= 2R = {two_r:.3e})")]
    Collision {
        i: usize,
        j: usize,
        distance: f64,
        two_r: f64,
        time: f64,
        dump: Option<PathBuf>,
    },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl SedError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        SedError::InvalidInput(msg.into())
    }

    /// Process exit code used by the command-line driver.
    pub fn exit_code(&self) -> i32 {
        match self {
            SedError::Assumption(_) | SedError::Collision { .. } => 2,
            SedError::NotConverged { .. } | SedError::BrinkmanNotConverged(_) => 3,
            SedError::DomainExhausted(_) => 4,
            _ => 1,
        }
    }
}
