use std::fmt;

use thiserror::Error;

/// One violated scene invariant.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneViolation {
    /// Dotted path of the offending field, e.g. `obstacle.radius`.
    pub field: String,
    pub message: String,
}

impl fmt::Display for SceneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scene: {}", join(.0))]
    InvalidScene(Vec<SceneViolation>),

    #[error("simulation unstable at substep {substep}: {reason}")]
    SimulationUnstable { substep: usize, reason: String },

    #[error("rollout failed at step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("optimization failed: every rollout errored (last: {last})")]
    OptimizationFailed { last: Box<Error> },

    #[error("parallel worker panicked")]
    WorkerPanicked,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

fn join(v: &[SceneViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
