use thiserror::Error;

/// Errors raised across the generation pipeline.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown color `{0}`")]
    UnknownColor(String),
    #[error("unknown motif `{0}`")]
    UnknownMotif(String),
    #[error("duplicate motif `{0}`")]
    DuplicateMotif(String),
    #[error("motif base is empty")]
    EmptyBase,
    #[error("invalid motif `{0}`: {1}")]
    InvalidMotif(String, String),
    #[error("map is not saturated")]
    NotSaturated,
    #[error("map is not planar (V - E + F = {euler})")]
    NonPlanar { euler: i64 },
    #[error("map is not connected")]
    Disconnected,
    #[error("malformed map: {0}")]
    MalformedMap(String),
    #[error("invalid fold pair ({0}, {1}): {2}")]
    InvalidPair(usize, usize, &'static str),
    #[error("word is not foldable")]
    NotFoldable,
    #[error("graph has {0} vertices, brute force is capped at {1}")]
    TooLarge(usize, usize),
    #[error("reach table would need {0} entries")]
    TableTooLarge(usize),
    #[error("degree-2 motifs `{0}` and `{1}` can be concatenated, elimination would not terminate")]
    NonTerminating(String, String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("malformed signature: {0}")]
    BadSignature(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("invalid filter expression `{0}`")]
    BadPredicate(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
