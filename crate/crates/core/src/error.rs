use alloc::string::String;

/// Errors raised by core operations.
///
/// Execution failures of primitives are not errors in this sense; they are
/// reported as [`crate::exec::ExecError`] values inside traces.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("placement collision: {0}")]
    PlacementCollision(String),
    #[error("collision: {0}")]
    Collision(String),
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("degenerate ray: {0}")]
    DegenerateRay(String),
    #[error("no feasible pose: {0}")]
    NoFeasiblePose(String),
    #[error("selection error: {0}")]
    Selection(String),
    #[error("planner unavailable: {0}")]
    PlannerUnavailable(String),
    #[error("no more plans: {0}")]
    NoMorePlans(String),
    #[error("randomization failure: {0}")]
    RandomizationFailure(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
