use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("instance norm needs at least two spatial elements per slice, got {0}")]
    DegenerateStatistics(usize),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(alloc::vec::Vec<usize>),

    #[error("tape was already consumed by a backward pass")]
    TapeConsumed,

    #[error("parameter `{0}` has no gradient")]
    MissingGradient(String),

    #[error("network `{0}` is not present in this bundle")]
    MissingNetwork(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in loss term `{0}`")]
    NonFinite(&'static str),

    #[error("data error: {0}")]
    Data(String),

    #[error("parameter mismatch at `{name}`: {detail}")]
    ParameterMismatch { name: String, detail: String },

    #[error("insufficient samples: need at least {needed}, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
