use alloc::string::String;
use core::fmt;

/// Errors raised by the core solver library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A node or edge index is outside its valid range.
    IndexOutOfRange { index: usize, len: usize },
    /// Two objects that must agree in size do not.
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// Graph construction rejected an edge list.
    InvalidGraph(String),
    /// Dataset construction rejected its input.
    InvalidDataset(String),
    /// A parameter is outside its admissible domain.
    InvalidArgument(String),
    /// Logistic loss requires labels in {0, 1}.
    InvalidLabel { node: Option<usize>, value: f64 },
    /// The solver needs at least one labeled node.
    EmptyTrainingSet,
    /// A message-passing agent did not receive what the protocol requires.
    Protocol {
        channel: String,
        round: usize,
        detail: String,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            Error::ShapeMismatch { what, expected, found } => write!(f, "{what}: expected {expected}, found {found}"),
            Error::InvalidGraph(msg) => write!(f, "invalid graph: {msg}"),
            Error::InvalidDataset(msg) => write!(f, "invalid dataset: {msg}"),
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::InvalidLabel { node, value } => match node {
                Some(i) => write!(f, "node {i}: label {value} is not in {{0, 1}}"),
                None => write!(f, "label {value} is not in {{0, 1}}"),
            },
            Error::EmptyTrainingSet => write!(f, "training set is empty"),
            Error::Protocol { channel, round, detail } => {
                write!(f, "protocol error on {channel} at round {round}: {detail}")
            }
        }
    }
}

impl core::error::Error for Error {}
