use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum NlsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field length {found} does not match grid size {expected}")]
    SizeMismatch { expected: usize, found: usize },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("corrupt field: {0}")]
    CorruptField(String),
    #[error("zero field: {0}")]
    ZeroField(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("undecidable, supply manual attestation: {0}")]
    Undecidable(String),
    #[error("hypothesis gate refused: {0}")]
    HypothesisViolation(String),
    #[error("not dilation-reachable: {0}")]
    NotDilationReachable(String),
    #[error("Nehari slice empty in family: {0}")]
    NehariEmpty(String),
    #[error("stationary solver diverged: {0}")]
    Divergence(String),
    #[error("stationary solver collapsed to zero: {0}")]
    MassCollapse(String),
    #[error("empty feasible family: {0}")]
    EmptyFamily(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("snapshot format error: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NlsError>;
