use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two vectors or tables that must agree in length do not.
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    /// A hyper-parameter or structural argument is out of its domain.
    Config(String),
    /// A value violates a domain invariant (non-finite entry, bad partition, ...).
    Invalid(String),
    /// The bank cannot supply the requested episode.
    Capacity {
        class_id: Option<String>,
        needed: usize,
        available: usize,
    },
    /// No class-name embedding exists for a class used in an episode.
    MissingEmbedding(String),
    /// Two evaluation reports cannot be paired episode by episode.
    Pairing(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch {
                what,
                expected,
                got,
            } => write!(
                f,
                "dimension mismatch in {what}: expected {expected}, got {got}"
            ),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::Invalid(msg) => write!(f, "invalid data: {msg}"),
            Error::Capacity {
                class_id: Some(class_id),
                needed,
                available,
            } => write!(
                f,
                "class `{class_id}` has {available} images, episode needs {needed}"
            ),
            Error::Capacity {
                class_id: None,
                needed,
                available,
            } => write!(f, "bank has {available} classes, episode needs {needed}"),
            Error::MissingEmbedding(class_id) => {
                write!(f, "no class-name embedding for class `{class_id}`")
            }
            Error::Pairing(msg) => write!(f, "reports cannot be paired: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
