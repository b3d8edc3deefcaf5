//! Error type shared by the core modules.

use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Two images that must share dimensions do not.
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    /// A buffer has the wrong number of elements for its declared shape.
    LengthMismatch { expected: usize, got: usize },
    /// An operation that needs at least one element received none.
    EmptyInput(&'static str),
    /// A parameter violates its documented range or precondition.
    InvalidArgument(&'static str),
    /// Timestep index outside `1..=timesteps`.
    TimestepOutOfRange { t: usize, timesteps: usize },
    /// A raw intensity exceeds the declared maximum during normalization.
    ValueAboveMax { value: u32, max: u32 },
    /// A pixel left the unit range where the contract requires [0, 1].
    PixelOutOfRange,
    /// Reference distribution concentrates all mass in a single bin.
    DegenerateReference,
    /// Sinusoidal embeddings need an even width.
    OddEmbeddingDim { dim: usize },
    /// Parameter vector does not match the model layout.
    ParamCountMismatch { expected: usize, got: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { expected, got } => write!(
                f,
                "shape mismatch: expected {}x{}, got {}x{}",
                expected.0, expected.1, got.0, got.1
            ),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::InvalidArgument(what) => write!(f, "invalid argument: {what}"),
            Error::TimestepOutOfRange { t, timesteps } => {
                write!(f, "timestep {t} outside 1..={timesteps}")
            }
            Error::ValueAboveMax { value, max } => {
                write!(f, "raw value {value} exceeds declared maximum {max}")
            }
            Error::PixelOutOfRange => write!(f, "pixel outside the [0, 1] range"),
            Error::DegenerateReference => {
                write!(f, "reference distribution has all mass in one bin")
            }
            Error::OddEmbeddingDim { dim } => {
                write!(f, "time embedding width {dim} must be even")
            }
            Error::ParamCountMismatch { expected, got } => {
                write!(f, "parameter count mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
