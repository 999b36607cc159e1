use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid word `{word}`: {reason}")]
    InvalidWord { word: String, reason: String },

    #[error("duplicate word `{0}` in lexicon")]
    DuplicateWord(String),

    #[error("duplicate question id {0}")]
    DuplicateQuestion(u32),

    #[error("invalid question {id}: {reason}")]
    InvalidQuestion { id: u32, reason: String },

    #[error("unknown phoneme class `{0}`")]
    UnknownClass(String),

    #[error("invalid class table: {0}")]
    InvalidClassTable(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid embedding for token `{token}`: {reason}")]
    InvalidEmbedding { token: String, reason: String },

    #[error("duplicate token id `{0}`")]
    DuplicateToken(String),

    #[error("log-likelihood of an empty node is undefined")]
    EmptyNode,

    #[error("inconsistent sufficient statistics: {0}")]
    InconsistentStats(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("word `{0}` is not in the lexicon")]
    UnknownWord(String),

    #[error("model is corrupt: {0}")]
    ModelCorruption(String),

    #[error("insufficient data: {samples} samples for {components} components")]
    InsufficientData { samples: usize, components: usize },

    #[error("unsupported model format version {found} (this build reads version {supported})")]
    Version { found: u64, supported: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid synthetic corpus spec: {0}")]
    SynthSpec(String),

    #[error("token sets differ: {0}")]
    TokenMismatch(String),

    #[error("invalid prosody tag `{0}`")]
    InvalidTag(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}
