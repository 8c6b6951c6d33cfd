use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Configuration or fixture is invalid or incomplete.
    #[error("configuration error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A memory capacity limit was exceeded.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Byte range outside a shared block.
    #[error("range error: offset {offset} + len {len} exceeds block length {length}")]
    Range { offset: u64, len: u64, length: u64 },

    /// Access from a stack that neither owns nor caches the block.
    #[error("locality error: block {block} is not resident on stack {stack}")]
    Locality { block: u32, stack: u32 },

    #[error("unknown block {0}")]
    UnknownBlock(u32),

    /// Malformed pseudopotential data.
    #[error("data error: {0}")]
    Data(String),

    /// A schedule does not cover its graph or references missing entities.
    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl SimError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        SimError::Domain(message.into())
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, SimError>;

/// One invariant violation found while validating a configuration document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// Dotted key path, e.g. `machine.hbm.bus_width_bits`.
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}
