use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("label out of range: {0}")]
    LabelOutOfRange(String),

    #[error("class {class} has {count} samples; at least {required} required")]
    ClassTooSmall {
        class: usize,
        count: usize,
        required: usize,
    },

    #[error("class {0} is absent from the sample set")]
    MissingClass(usize),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error(
        "acceptance rate collapsed to {rate:.2e} over {window} draws; \
         raise the ceiling safety factor or improve the density-ratio model"
    )]
    AcceptanceCollapse { rate: f64, window: usize },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// A pipeline stage failed.
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by the configuration itself rather than by a
    /// computation.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parse { .. } | Error::Io { .. })
    }

    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    pub(crate) fn parse(path: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
