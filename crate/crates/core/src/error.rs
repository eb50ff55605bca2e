use alloc::string::String;
use core::fmt;

/// Errors raised by the algorithmic core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands disagree on a dimension.
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    /// A collection that must be non-empty was empty.
    Empty(&'static str),
    /// A sentence lacks the embedding record an operation needs.
    MissingEmbedding { variety: String, sentence: usize },
    /// A sentence lacks gold annotations needed for training or scoring.
    MissingLabels { variety: String, sentence: usize },
    /// A class index fell outside its label space.
    LabelOutOfRange { label: usize, classes: usize },
    /// Both token sets were empty, so the weighted Jaccard ratio is 0/0.
    UndefinedSimilarity,
    /// Zero variance in a CKA operand.
    ZeroVariance,
    /// Structurally invalid configuration.
    Config(String),
    /// Optimizer step counter must start at 1.
    InvalidStep,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape {
                what,
                expected,
                found,
            } => write!(f, "shape mismatch in {what}: expected {expected}, found {found}"),
            Error::Empty(what) => write!(f, "{what} must not be empty"),
            Error::MissingEmbedding { variety, sentence } => {
                write!(f, "sentence {sentence} of variety '{variety}' has no embedding")
            }
            Error::MissingLabels { variety, sentence } => write!(
                f,
                "sentence {sentence} of variety '{variety}' lacks task annotations"
            ),
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::UndefinedSimilarity => {
                f.write_str("token-length weighted Jaccard is undefined for two empty sets")
            }
            Error::ZeroVariance => f.write_str("CKA operand has zero variance after centering"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InvalidStep => f.write_str("optimizer step counter must be >= 1"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn ensure_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Shape {
            what,
            expected,
            found,
        })
    }
}
