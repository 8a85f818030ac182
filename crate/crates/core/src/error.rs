use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("exact joint needs {cells} cells, above the cap of {cap}")]
    CapExceeded { cells: u128, cap: u128 },
    #[error("adjustment set {set:?} is not backdoor-admissible for ({x}, {y})")]
    Inadmissible { x: String, y: String, set: Vec<String> },
    #[error("positivity violated: p({x} = {value} | adjustment cell) is zero")]
    Positivity { x: String, value: usize },
    #[error("image does not match any rendered template (nearest L1 distance {distance})")]
    NoMatch { distance: u64 },
    #[error("abduction mismatch: stored factors {stored} but image decodes to {decoded}")]
    AbductionMismatch { stored: String, decoded: String },
    #[error("no unconfounded instances in dataset")]
    EmptySubset,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("training diverged: non-finite loss at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize },
    #[error("missing factor `{0}` in instance provenance")]
    MissingFactor(String),
    #[error("malformed data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
