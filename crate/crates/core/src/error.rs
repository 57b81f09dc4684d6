use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid tree shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {left} vs {right}")]
    ShapeMismatch { left: String, right: String },
    #[error("invalid permutation: {0}")]
    InvalidPerm(String),
    #[error("portrait is not cyclic (some label lies outside C_d)")]
    NotCyclic,
    #[error("level {got} out of range (allowed {min}..={max})")]
    LevelOutOfRange { got: usize, min: usize, max: usize },
    #[error("digit {digit} out of range 1..={d}")]
    DigitOutOfRange { digit: usize, d: usize },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared name `{0}`")]
    UndeclaredName(String),
    #[error("arity mismatch: expected {expected} children, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("enumeration cap exceeded: {size} > {cap}")]
    CapExceeded { size: String, cap: u64 },
    #[error("degree mismatch: expected {expected}, found {found}")]
    DegreeMismatch { expected: usize, found: usize },
    #[error("element is not in the group")]
    NotInGroup,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("operation undefined for case {0}")]
    UndefinedForCase(String),
    #[error("missing word data: {0}")]
    MissingWord(String),
    #[error("arithmetic error: {0}")]
    Arithmetic(String),
}

impl Error {
    pub(crate) fn parse_at(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let before = &text[..offset.min(text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.rsplit('\n').next().map_or(0, |s| s.chars().count()) + 1;
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
