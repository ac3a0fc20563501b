use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("roots are not closed under complex conjugation")]
    NonRealCoefficients,

    #[error("polynomial has degree zero")]
    DegreeZero,

    #[error("stationary relation violated (residual {residual:.3e})")]
    StationaryViolated { residual: f64 },

    #[error("configuration is not generic (pole-critical distance {distance:.3e})")]
    NonGeneric { distance: f64 },

    #[error("coincident points (distance {distance:.3e})")]
    CoincidentPoints { distance: f64 },

    #[error("found {found} of {expected} pole configurations")]
    IncompleteEnumeration { found: usize, expected: usize },

    #[error("link pattern {0} not found among solutions")]
    PatternNotFound(String),

    #[error("two solutions share link pattern {0}")]
    PatternConflict(String),

    #[error("locus trace failed: {0}")]
    TraceFailed(String),

    #[error("traced pattern is crossing")]
    CrossingPattern,

    #[error("a locus branch leaves every bounding box")]
    UnboundedBranch,

    #[error("no root of the tip equation in the closed upper half-plane")]
    NoHalfPlaneRoot,

    #[error("step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("tracked point {0} was absorbed by the hull")]
    DeadPoint(usize),

    #[error("value out of range: {0}")]
    OutOfRange(String),
}
