use crate::autodiff::TensorError;
use crate::data::DataError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{op}: {detail}")]
    Invalid { op: &'static str, detail: String },
    #[error("phase {phase}, epoch {epoch}, batch {batch}: {source}")]
    Training {
        phase: u8,
        epoch: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("phase {phase}, epoch {epoch}, batch {batch}: loss is not finite")]
    NonFiniteLoss { phase: u8, epoch: usize, batch: usize },
    #[error("unexpected end of checkpoint")]
    CheckpointTruncated,
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Invalid { op, detail: detail.into() }
    }
}
