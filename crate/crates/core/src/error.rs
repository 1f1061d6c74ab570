use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("degenerate ball: {0}")]
    DegenerateBall(String),
    #[error("precondition violated ({bound}): {detail}")]
    Precondition { bound: String, detail: String },
    #[error("point outside chart: {0}")]
    OutsideChart(String),
    #[error("ambiguous nearest-point projection: {0}")]
    Ambiguous(String),
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("size cap exceeded: {0}")]
    SizeCap(String),
    #[error("mean not zero: {0}")]
    NotMeanZero(String),
    #[error("star-likeness audit failed: {0}")]
    NotStarLike(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition(bound: &str, detail: impl Into<String>) -> Error {
    Error::Precondition { bound: bound.to_string(), detail: detail.into() }
}
