use thiserror::Error;

/// Errors raised by models, path integrators and estimators.
///
/// A blown-up path is not an error: it is flagged on the [`Trajectory`]
/// and counted by the estimators.
///
/// [`Trajectory`]: crate::paths::Trajectory
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("model does not provide {0}")]
    MissingDerivative(&'static str),
    #[error("model has no manifold geometry (ricci/transport unavailable)")]
    MissingGeometry,
    #[error("diffusion coefficient is degenerate at the current point")]
    Degenerate,
    #[error("path integration blew up at step {step}")]
    BlownUpPath { step: usize },
    #[error("all {0} paths blew up")]
    AllPathsBlewUp(usize),
    #[error("potential exceeds its declared upper bound {bound} (value {value})")]
    UnboundedPotential { bound: f64, value: f64 },
    #[error("no paths landed within bandwidth {bandwidth} of the conditioning point")]
    EmptyBin { bandwidth: f64 },
    #[error("estimator requires a Lie group model")]
    NotLieGroup,
    #[error("form is not closed")]
    NotClosed,
    #[error("form does not provide a codifferential")]
    MissingCodifferential,
    #[error("form degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("estimator requires a gradient system")]
    NotGradientSystem,
    #[error("unsupported form degree {degree} on a {dim}-dimensional manifold")]
    UnsupportedDegree { degree: usize, dim: usize },
    #[error("unsupported model: {0}")]
    UnsupportedModel(&'static str),
    #[error("direction vector must be nonzero")]
    ZeroDirection,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
