//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by simulation, fitting and analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Tilt angle outside the small-angle validity range of the Coriolis formula.
    #[error("tilt {0} rad outside small-angle range (|theta| <= 0.1 rad)")]
    TiltOutOfRange(f64),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Invalid or inconsistent configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Iterative fit did not converge within the iteration budget.
    #[error("fit did not converge after {0} iterations")]
    NoConvergence(usize),

    /// Fit window does not contain a usable peak (SNR below threshold).
    #[error("degenerate window: peak SNR {snr:.2} below {min_snr:.2}")]
    DegenerateWindow { snr: f64, min_snr: f64 },

    /// Two traces do not share a common time base.
    #[error("misaligned traces: {0}")]
    MisalignedTraces(String),

    /// A detection channel carries no signal where one is required.
    #[error("zero signal: {0}")]
    ZeroSignal(String),

    /// Best-fitting conic is not an ellipse.
    #[error("degenerate conic: best fit is not an ellipse")]
    DegenerateConic,

    /// Not enough points for the requested fit.
    #[error("too few points: need {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    /// Scalar minimization found no interior minimum on the search interval.
    #[error("no minimum inside interval [{0}, {1}]")]
    NoMinimumInInterval(f64, f64),

    /// Requested ellipse group size below the supported minimum.
    #[error("group too small: need >= {needed}, got {got}")]
    GroupTooSmall { needed: usize, got: usize },

    /// A fit report required by a downstream step is not converged.
    #[error("fit not converged: {0}")]
    NotConverged(String),

    /// No configuration pairs available for differencing.
    #[error("no configuration pairs in input")]
    NoPairs,

    /// Time series shorter than the minimum for the requested statistic.
    #[error("series too short: need >= {needed}, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    /// Correlation against a constant series is undefined.
    #[error("constant series: {0}")]
    ConstantSeries(String),

    /// Parameter name not present in the sensitivity ledger.
    #[error("unknown parameter: {0}")]
    UnknownParameter(String),

    /// Normal equations are singular or nearly singular.
    #[error("ill-conditioned fit: {0}")]
    IllConditioned(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
