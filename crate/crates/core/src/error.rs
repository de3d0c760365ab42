use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("row sampling distribution is degenerate: matrix has zero Frobenius norm")]
    DegenerateDistribution,

    #[error("row has zero norm")]
    ZeroRow,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("insufficient workers: requested {requested}, only {available} active")]
    InsufficientWorkers { requested: usize, available: usize },

    #[error("unknown worker id {0}")]
    UnknownWorker(usize),

    #[error("data error: {0}")]
    Data(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("alpha = {0} is not below 1; the matrix is rank deficient")]
    RankDeficient(f64),

    #[error("instance too large for exhaustive enumeration: {0} subsets")]
    InstanceTooLarge(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}
