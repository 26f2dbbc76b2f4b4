use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("representative corpus too small")]
    RepTooSmall,

    #[error("unseeded state: representative word {word:?} has zero count")]
    Unseeded { word: String },

    #[error("document {doc_id} has no sentences")]
    EmptyDocument { doc_id: u64 },

    #[error("target corpus is empty")]
    EmptyTarget,

    #[error("manifest is empty")]
    EmptyManifest,

    #[error("document {doc_id} is referenced by the manifest but missing from the corpus")]
    DanglingDocId { doc_id: u64 },

    #[error("duplicate document id {doc_id}")]
    DuplicateDocId { doc_id: u64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("shard {index}: {source}")]
    Shard {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True when the failure is caused by bad input or configuration rather
    /// than by the environment.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Io { .. } => false,
            Error::Shard { source, .. } => source.is_input_error(),
            _ => true,
        }
    }
}
