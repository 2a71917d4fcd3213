use std::io;

use thiserror::Error;

/// Every failure the library can report.
///
/// Variants fall into three groups: configuration problems (bad shapes,
/// invalid parameters), numerical failures (non-finite values, singular
/// systems), and I/O or format errors from external datasets. The CLI maps
/// them onto exit codes via [`Error::is_numerical`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("Hermite degree {degree} exceeds the supported maximum of {max}")]
    DegreeTooLarge { degree: usize, max: usize },

    #[error("quadrature order {order} is too small: need at least {required}")]
    QuadratureTooCoarse { order: usize, required: usize },

    #[error("activation is not finite at quadrature node {node} (value {value})")]
    NonFiniteActivation { node: f64, value: f64 },

    #[error(
        "inconsistent Hermite coefficients: second-moment deficit {deficit:e} is below -1e-10"
    )]
    InconsistentCoefficients { deficit: f64 },

    #[error("non-finite value produced during {stage}")]
    NonFinite { stage: &'static str },

    #[error("singular system in {context}; use a positive ridge penalty")]
    Singular { context: &'static str },

    #[error("rank-deficient basis in {context}")]
    RankDeficient { context: &'static str },

    #[error("spike-aligned target direction requires a spike in component {component}")]
    MissingSpike { component: usize },

    #[error("a Hermite activation needs a noise stream")]
    MissingNoiseStream,

    #[error("class-sign labels need exactly 2 mixture components, got {0}")]
    ClassSignComponents(usize),

    #[error("zero trace estimate for {0}")]
    ZeroTrace(&'static str),

    #[error("dense spectral fallback limited to n <= {max}, got n = {n}")]
    DenseFallbackTooLarge { n: usize, max: usize },

    #[error("malformed dataset {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures that come from the numerics rather than from the
    /// inputs or the environment.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteActivation { .. }
                | Error::InconsistentCoefficients { .. }
                | Error::NonFinite { .. }
                | Error::Singular { .. }
                | Error::RankDeficient { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
