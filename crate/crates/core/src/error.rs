use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("amplitude vector has vanishing norm ({norm:e})")]
    ZeroVector { norm: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state is not normalized (squared norm {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },

    #[error("bin index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("analyzer phases are not a uniform grid of at least 3 points over one period")]
    NonUniformGrid,

    #[error("scan of pair ({}, {}) has no counts", pair.0, pair.1)]
    NoCounts { pair: (usize, usize) },

    #[error("fringe of pair ({}, {}) is flat: visibility {visibility:.4} below floor {floor}", pair.0, pair.1)]
    FringeFlat {
        pair: (usize, usize),
        visibility: f64,
        floor: f64,
    },

    #[error("no scan supplied for adjacent pair ({}, {})", pair.0, pair.1)]
    MissingPair { pair: (usize, usize) },

    #[error(
        "fringe mean of pair ({}, {}) deviates from the populations by {deviation:e} ({sigmas:.1} standard errors)",
        pair.0, pair.1
    )]
    PopulationMismatch {
        pair: (usize, usize),
        deviation: f64,
        sigmas: f64,
    },

    #[error("fringe probability {value} outside [0, 1]")]
    ProbabilityOutOfRange { value: f64 },

    #[error("verification failed: fidelity {fidelity} below threshold {threshold}")]
    VerificationFailed { fidelity: f64, threshold: f64 },

    #[error("unsupported spin count {0} (expected 1 or 2)")]
    UnsupportedSpinCount(usize),

    #[error("time step too large: dt * |H| = {product} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("overlap with the initial state vanished at t = {time}")]
    OverlapVanished { time: f64 },

    #[error("amplitude of bin {bin} vanished")]
    AmplitudeVanished { bin: usize },
}

impl Error {
    /// True for guards raised by the numerical routines rather than by bad input or
    /// failed calibration.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::ZeroVector { .. }
                | Error::NotNormalized { .. }
                | Error::ProbabilityOutOfRange { .. }
                | Error::StepTooLarge { .. }
                | Error::OverlapVanished { .. }
                | Error::AmplitudeVanished { .. }
        )
    }
}
