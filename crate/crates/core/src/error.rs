use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::game::Stage;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} must be finite")]
    NonFinite { what: &'static str },

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("expected a {expected:?} state, got {found:?}")]
    WrongStage { expected: Stage, found: Stage },

    #[error("operation requires {expected}, trajectory mode is {found}")]
    WrongMode { expected: &'static str, found: String },

    #[error("trajectory has no recorded half states")]
    MissingHalfStates,

    #[error("power iteration did not converge after {iterations} iterations (last estimate {last_estimate})")]
    NotConverged { iterations: usize, last_estimate: f64 },

    #[error("state diverged at step {step}")]
    Diverged { step: usize, partial: Box<Trajectory> },

    #[error("opponent rule violated its contract at round {round}: {reason}")]
    OpponentContract { round: usize, reason: String },

    #[error("update map is not elliptic (trace {trace})")]
    NotElliptic { trace: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        })
    }
}

pub(crate) fn check_finite(what: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}
