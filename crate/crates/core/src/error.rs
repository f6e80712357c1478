use thiserror::Error;

/// Errors raised by the estimation and I/O routines of this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("stage {stage} exceeds network diameter {r_max}")]
    StageExceedsDiameter { stage: usize, r_max: usize },

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("transfer matrix U_p(ω) is singular at ω = {omega}")]
    SingularTransfer { omega: f64 },

    #[error("matrix at ω = {omega} is ill-conditioned (condition number {condition:.3e})")]
    IllConditioned { omega: f64, condition: f64 },

    #[error("singular matrices at frequencies {0:?}")]
    SingularAt(Vec<f64>),

    #[error("rank-deficient design, deficient columns: {0:?}")]
    RankDeficient(Vec<String>),

    #[error("non-positive diagonal entry at index {index} (value {value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("input matrix is not Hermitian (max deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("covariance selection did not converge after {sweeps} sweeps (max change {max_change:.3e}, duality gap {duality_gap:.3e})")]
    NoConvergence {
        sweeps: usize,
        max_change: f64,
        duality_gap: f64,
    },

    #[error("no pair of nodes at distance {{{lo}, {hi}}} for stage {stage}; network too small for requested depth")]
    EmptyStage { stage: usize, lo: usize, hi: usize },

    #[error("degenerate series at node {0} (zero variance)")]
    DegenerateSeries(usize),

    #[error("invalid OHLC record: {0}")]
    InvalidOhlc(String),

    #[error("no candidate threshold yields a connected network")]
    NoConnectedThreshold,

    #[error("frequency grids differ: {0}")]
    GridMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
