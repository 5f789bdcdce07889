use crate::penalty::PenaltyKind;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A penalty parameter is outside its admissible domain.
    #[error("{kind} requires {constraint}")]
    PenaltyDomain {
        kind: PenaltyKind,
        constraint: &'static str,
    },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// The loss gradient at the null model vanishes, so no lambda grid exists.
    #[error("degenerate response: the loss gradient at the null model is zero for every penalized variable")]
    DegenerateResponse,

    /// A cell of an input file could not be used. `row` is the 1-based data
    /// row (the header is not counted).
    #[error("row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
