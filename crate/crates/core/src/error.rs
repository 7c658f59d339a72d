use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    // ingest
    #[error("header matches no registered source schema")]
    UnrecognizedSchema,
    #[error("header matches several source schemas: {0:?}")]
    AmbiguousSchema(Vec<String>),
    #[error("column {column:?}: cannot parse {value:?} ({reason})")]
    MalformedValue {
        column: String,
        value: String,
        reason: String,
    },
    #[error("dataset is empty")]
    EmptyDataset,

    // crimemap
    #[error("rules {first:?} and {second:?} share priority {priority}")]
    DuplicatePriority {
        priority: i64,
        first: String,
        second: String,
    },
    #[error("rule for {0} has no stems")]
    EmptyRule(String),

    // corpus
    #[error("unknown article attribute {0:?}")]
    UnknownAttribute(String),
    #[error("invalid crime dictionary: {0}")]
    InvalidDictionary(String),

    // vectorize
    #[error("document-frequency pruning removed every term")]
    EmptyVocabulary,
    #[error("term {0:?} is not in the vocabulary")]
    UnknownTerm(String),
    #[error("cannot fit a vocabulary on zero documents")]
    NoDocuments,

    // cluster
    #[error("k = {k} exceeds the number of rows ({n})")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    // topics
    #[error("corpus has no tokens")]
    EmptyCorpus,

    // analytics
    #[error("no values supplied")]
    EmptyInput,
    #[error("data has zero total variance")]
    DegenerateData,

    // pipeline
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },
    #[error("missing output of stage {stage}: {path}")]
    MissingStageOutput { stage: String, path: PathBuf },
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn csv(path: impl AsRef<Path>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.as_ref().to_path_buf(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn malformed(column: &str, value: &str, reason: impl Into<String>) -> Self {
        Error::MalformedValue {
            column: column.to_string(),
            value: value.to_string(),
            reason: reason.into(),
        }
    }
}
