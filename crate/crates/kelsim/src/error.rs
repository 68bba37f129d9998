//! Error type shared across the crate.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid construction rejected (odd N, N too small, nonpositive L, bad dimension).
    InvalidGrid(String),
    /// Operation applied to fields bound to different grids.
    GridMismatch,
    /// A field or parameter violates an operation precondition.
    InvalidInput(String),
    /// Vector field has the wrong orientation for this operation.
    OrientationMismatch,
    /// Time step exceeds the stability bound.
    CflViolation { dt: f64, bound: f64 },
    /// Non-finite value encountered where finite data is required.
    NonFinite(String),
    /// A diagnostic region does not fit in the grid or trajectory.
    RegionOutOfRange(String),
    /// Snapshot plan exceeds the memory budget.
    MemoryBudget { required: u64, budget: u64 },
    /// I/O or format error on dumps, manifests and reports.
    Io(String),
    /// Degenerate diagnostic input (e.g. zero oscillation).
    Degenerate(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::GridMismatch => write!(f, "fields are bound to different grids"),
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::OrientationMismatch => write!(f, "vector field orientation mismatch"),
            Error::CflViolation { dt, bound } => {
                write!(f, "time step {dt} exceeds stability bound {bound}")
            }
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::RegionOutOfRange(msg) => write!(f, "region out of range: {msg}"),
            Error::MemoryBudget { required, budget } => {
                write!(f, "snapshot plan needs {required} bytes, budget is {budget}")
            }
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
