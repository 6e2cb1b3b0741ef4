use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid cascade {cascade_id}: {reason}")]
    InvalidCascade { cascade_id: String, reason: String },

    #[error("cascade {cascade_id} has {len} events, above the configured cap of {cap}")]
    CascadeTooLarge { cascade_id: String, len: usize, cap: usize },

    #[error("column {column} of cascade {cascade_id} has no positive parent weight")]
    DegenerateColumn { cascade_id: String, column: usize },

    #[error("conductance {value} for ({source_user}, {target_user}) is outside [0, 1]")]
    ConductanceRange { source_user: String, target_user: String, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("unknown target {0:?}")]
    UnknownTarget(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("comparison budget exhausted")]
    BudgetExhausted,

    #[error("brute-force enumeration refused for n = {0} (limit {1})")]
    TooLargeForEnumeration(usize, usize),

    #[error("observed accuracy {0} is indistinguishable from random")]
    IndistinguishableFromRandom(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
