use thiserror::Error;

use crate::solve::SolveResult;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("variable x{var} has empty domain [{lower}, {upper}]")]
    EmptyDomain { var: usize, lower: f64, upper: f64 },
    #[error("binary variable x{var} has bounds outside [0, 1]")]
    BinaryBounds { var: usize },
    #[error("row {row} references unknown variable x{var}")]
    UnknownVariable { row: usize, var: usize },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid model: {0}")]
    InvalidModel(#[from] ModelError),
    #[error("invalid solve options: {0}")]
    InvalidOptions(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    /// Node or time limit hit; carries the best incumbent found so far.
    #[error("search limit reached ({})", if .incumbent.is_some() { "incumbent available" } else { "no incumbent" })]
    LimitReached { incumbent: Option<Box<SolveResult>> },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
