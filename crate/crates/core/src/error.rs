use thiserror::Error;

/// Failure modes of the solver and simulator.
///
/// Numeric payloads are stored as `f64` regardless of the working scalar so the
/// error type stays non-generic.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mean rate E[X_1] = {mean} is not strictly positive")]
    NonPositiveMean { mean: f64 },

    #[error("exponential moment diverges in {context}: rate {rate} is outside the convergence bound {bound}")]
    ExpMomentDiverges {
        context: &'static str,
        rate: f64,
        bound: f64,
    },

    #[error("simulated time exceeded the horizon {horizon} before first passage")]
    HorizonExceeded { horizon: f64 },

    #[error("model has no downward movement (subordinator); the descending ladder is undefined")]
    NoDownwardMovement,

    #[error("Laplace exponent has no positive root below the convergence bound {strip}")]
    RootNotBracketed { strip: f64 },

    #[error("two-sided model requires an empirical descending occupation estimate")]
    MissingDescendingRep,

    #[error("ladder normalization mismatch: ascending drift would be {drift} (tolerance {tolerance})")]
    NormalizationMismatch { drift: f64, tolerance: f64 },

    #[error("only {found} ladder events recorded, at least {required} required")]
    InsufficientRecords { found: usize, required: usize },

    #[error("Volterra residual {residual} exceeds tolerance after refinement")]
    VolterraStepTooCoarse { residual: f64 },

    #[error("driftless ladder without a renewal density; enable the Monte Carlo fallback")]
    DriftlessLadderUnsupported,

    #[error("gain rate is not unimodal: local minimum near {x} between two local maxima")]
    NotUnimodal { x: f64 },

    #[error("level {rho} is at or above the maximal gain rate {g_max}")]
    AboveMaximum { rho: f64, g_max: f64 },

    #[error("gain rate stays above {rho} up to the working bound {bound} on the right")]
    NoUpperCrossing { rho: f64, bound: f64 },

    #[error("gain rate stays above {rho} down to the working bound {bound} on the left")]
    NoLowerCrossing { rho: f64, bound: f64 },

    #[error("problem is unbounded: the one-cycle gain grows without bound (value is +infinity)")]
    Unbounded,

    #[error("no level yields a threshold pair; the optimal value {rho_sup} is not attained by an (s,S) strategy")]
    NoThreshold { rho_sup: f64 },

    #[error("restart point {restart} lies above the upper threshold throughout the bracket")]
    RestartAboveThreshold { restart: f64 },

    #[error("strategy has zero expected cycle time")]
    ZeroCycleTime,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
