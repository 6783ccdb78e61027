use thiserror::Error;

/// Errors raised while configuring, building or combining sketches.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("at least one hash seed is required")]
    EmptySeeds,

    #[error("sketch dimensions differ: {left_rows}x{left_cols} vs {right_rows}x{right_cols}")]
    DimensionMismatch {
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("sketches were built with different hash seeds")]
    SeedMismatch,

    #[error("cannot allocate {cells} counters of {bytes_per_cell} bytes")]
    Capacity { cells: usize, bytes_per_cell: usize },

    #[error("invalid row assignment: {0}")]
    RowAssignment(String),

    #[error("sketch holds {sketch} items but the oracle counted {oracle}")]
    TotalsMismatch { sketch: u64, oracle: u64 },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
