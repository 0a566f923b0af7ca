use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] taxel_core::Error),
    #[error(transparent)]
    Nn(#[from] taxel_nn::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },
    #[error("training diverged at epoch {epoch}{}", match .checkpoint {
        Some(p) => format!("; last good checkpoint kept at {}", p.display()),
        None => String::new(),
    })]
    Diverged { epoch: usize, checkpoint: Option<PathBuf> },
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Wraps `self` with the id of the sample it came from.
    pub fn in_sample(self, id: impl Into<String>) -> Self {
        Error::Sample { id: id.into(), source: Box::new(self) }
    }

    /// True when the caller supplied bad input (configuration, missing or
    /// malformed files, misuse of the API) rather than hitting a domain failure.
    pub fn is_usage(&self) -> bool {
        match self {
            Error::Config(_) | Error::Format { .. } => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Core(e) => {
                matches!(e, taxel_core::Error::Format { .. })
                    || matches!(e, taxel_core::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
            }
            Error::Nn(e) => {
                matches!(e, taxel_nn::Error::Config(_) | taxel_nn::Error::Usage(_) | taxel_nn::Error::Format { .. })
                    || matches!(e, taxel_nn::Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
            }
            Error::Sample { source, .. } => source.is_usage(),
            Error::Diverged { .. } => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
