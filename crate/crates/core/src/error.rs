use thiserror::Error;

/// Failure modes shared by every module of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation undefined at p = 2: {0}")]
    DegenerateAtTwo(&'static str),

    #[error("unsupported parameter range: {0}")]
    UnsupportedRange(String),

    #[error("degenerate region: {0}")]
    DegenerateRegion(String),

    #[error("zero denominator in {0}")]
    ZeroDenominator(&'static str),

    #[error("quadrature did not converge: achieved error estimate {estimate:e} > tolerance {tolerance:e}")]
    QuadratureNotConverged { estimate: f64, tolerance: f64 },

    #[error("test function failed the biconvexity spot-check at ({x}, {y}) along axis {axis}")]
    NotBiconvex { x: f64, y: f64, axis: usize },

    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),

    #[error("tail weight underflow at stage {stage}: weight {weight:e}")]
    Underflow { stage: usize, weight: f64 },

    #[error("non-diagonal matrix in tree: {0}")]
    NonDiagonal(String),

    #[error("split is not rank-one: det(B - C) = {0:e}")]
    NotRankOne(f64),

    #[error("realization infeasible: {0}")]
    Realization(String),

    #[error("C1 budget infeasible: requested delta {requested}, attainable {attainable}")]
    DeltaInfeasible { requested: f64, attainable: f64 },

    #[error("support too close to the periodic boundary: {0}")]
    Wraparound(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
