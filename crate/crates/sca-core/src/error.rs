//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A tensor axis did not have the expected extent.
    ShapeMismatch {
        op: &'static str,
        axis: usize,
        expected: usize,
        got: usize,
    },
    /// Data buffer length disagrees with the product of the shape.
    DataLength { expected: usize, got: usize },
    /// An argument was out of its valid range.
    BadArgument { op: &'static str, detail: String },
    /// An operation that needs at least one element got none.
    EmptyInput { op: &'static str },
    /// A non-finite value showed up where only finite values are allowed.
    NonFinite { context: String },
    /// Two records that must refer to the same item do not.
    ItemMismatch { expected: String, got: String },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch {
                op,
                axis,
                expected,
                got,
            } => write!(
                f,
                "{op}: axis {axis} has extent {got}, expected {expected}"
            ),
            Error::DataLength { expected, got } => {
                write!(f, "data length {got} does not match shape product {expected}")
            }
            Error::BadArgument { op, detail } => write!(f, "{op}: {detail}"),
            Error::EmptyInput { op } => write!(f, "{op}: empty input"),
            Error::NonFinite { context } => write!(f, "non-finite value in {context}"),
            Error::ItemMismatch { expected, got } => {
                write!(f, "item id mismatch: expected {expected:?}, got {got:?}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
