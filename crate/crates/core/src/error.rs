use thiserror::Error;

use crate::game::Model;

/// Validation failures for a [`GameSpec`](crate::game::GameSpec).
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("empty {field}")]
    Empty { field: &'static str },
    #[error("dimension mismatch in {field} at index {index}: expected {expected}, found {found}")]
    DimensionMismatch {
        field: &'static str,
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("non-finite payoff at row {row}, column {column}")]
    NonFinitePayoff { row: usize, column: usize },
    #[error("invalid belief column at row {row}: {column} is not a column index")]
    InvalidBeliefColumn { row: usize, column: usize },
    #[error("alpha out of range: {0} (must lie in [0, 1])")]
    AlphaOutOfRange(f64),
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("duplicate label in {field} at index {index}: {label:?}")]
    DuplicateLabel {
        field: &'static str,
        index: usize,
        label: String,
    },
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("failed to parse game spec: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("model {found} is not supported by the {solver} solver")]
    WrongModel { solver: &'static str, found: Model },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
