//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed dex at offset {offset:#x}: {reason}")]
    MalformedDex { offset: usize, reason: String },

    #[error("unknown mnemonic `{mnemonic}` at line {line}")]
    UnknownMnemonic { mnemonic: String, line: usize },

    #[error("malformed smali at line {line}: {reason}")]
    MalformedSmali { line: usize, reason: String },

    #[error("archive contains no classes*.dex entries")]
    NoDexEntries,

    #[error("malformed archive: {0}")]
    MalformedArchive(String),

    #[error("app `{0}` has no opcode sequences to fingerprint")]
    EmptyApp(String),

    #[error("fingerprint of app `{0}` is empty; distance is undefined")]
    EmptyFingerprint(String),

    #[error("duplicate app id `{0}`")]
    DuplicateAppId(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("cluster set references unknown app id `{0}`")]
    MismatchedClusterSet(String),

    #[error("archive has no AndroidManifest.xml entry")]
    NoManifest,

    #[error("malformed manifest: {0}")]
    MalformedManifest(String),

    #[error("row `{app_id}` has width {got}, expected {expected}")]
    WidthMismatch {
        app_id: String,
        got: usize,
        expected: usize,
    },

    #[error("csv parse error at line {line}: {reason}")]
    CsvParseError { line: usize, reason: String },

    #[error("labels are degenerate: {0}")]
    DegenerateLabels(String),

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("corpus contains no duplicate fingerprints; nothing to demonstrate")]
    NoDuplicates,

    #[error("missing artifact `{0}`")]
    MissingArtifact(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
