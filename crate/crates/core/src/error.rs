use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of the operation.
    Domain(String),
    /// A node or cell index outside the grid.
    IndexOutOfRange { index: usize, len: usize },
    /// A labeled side has no active node.
    EmptySide(&'static str),
    /// Two consecutive curve nodes are not 8-neighbors.
    NotAdjacent { from: usize, to: usize },
    /// The chain graph would be disconnected.
    RadiusBelowSpacing { radius: f64, spacing: f64 },
    /// A density value is negative, NaN, or infinite.
    InvalidDensity { index: usize, value: f64 },
    /// Length mismatch between a field and the grid.
    SizeMismatch { expected: usize, found: usize },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for {len} nodes")
            }
            Error::EmptySide(side) => write!(f, "side {side} has no active node"),
            Error::NotAdjacent { from, to } => {
                write!(f, "nodes {from} and {to} are not grid-adjacent")
            }
            Error::RadiusBelowSpacing { radius, spacing } => write!(
                f,
                "step radius {radius} is below the grid spacing {spacing}"
            ),
            Error::InvalidDensity { index, value } => {
                write!(f, "density value {value} at node {index} is not a nonnegative real")
            }
            Error::SizeMismatch { expected, found } => {
                write!(f, "expected {expected} values, found {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
