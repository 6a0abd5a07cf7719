use std::fmt;

use serde::Serialize;

/// Which feasibility constraint of a transport matrix failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "constraint")]
pub enum ConstraintViolation {
    /// Mass sent backwards: `pi[i][j] > 0` although `a_i > b_j`.
    ForwardLooking { row: usize, col: usize, mass: f64 },
    /// A constrained row does not sum to one.
    RowSum { row: usize, sum: f64, excess: f64 },
    /// A constrained column does not sum to one.
    ColumnSum { col: usize, sum: f64, excess: f64 },
    /// Negative entry.
    Negative { row: usize, col: usize, value: f64 },
    /// Matrix shape does not match the point configuration.
    Shape { rows: usize, cols: usize, expected_rows: usize, expected_cols: usize },
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // 1-based indices, matching the JSON wire format.
        match self {
            Self::ForwardLooking { row, col, mass } => {
                write!(f, "entry ({}, {}) carries {mass} backwards in time", row + 1, col + 1)
            }
            Self::RowSum { row, sum, excess } => {
                write!(f, "row {} sums to {sum} (off by {excess})", row + 1)
            }
            Self::ColumnSum { col, sum, excess } => {
                write!(f, "column {} sums to {sum} (off by {excess})", col + 1)
            }
            Self::Negative { row, col, value } => {
                write!(f, "entry ({}, {}) is negative: {value}", row + 1, col + 1)
            }
            Self::Shape { rows, cols, expected_rows, expected_cols } => write!(
                f,
                "matrix is {rows}x{cols} but the configuration needs {expected_rows}x{expected_cols}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("denominator mismatch: {left} vs {right}; lift both measures to {lcm} first")]
    DenominatorMismatch { left: u64, right: u64, lcm: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// The queried event did not happen within the simulated horizon.
    /// `attained` is the extreme value reached (minimum of D for embeddings,
    /// maximum level for inverse local times), in units of `1/q`.
    #[error("horizon exceeded after {steps} steps (attained {attained})")]
    HorizonExceeded { steps: u64, attained: i64 },

    #[error("truncation too short: {0}")]
    TruncationTooShort(String),

    #[error("excursion carries no mass")]
    EmptyExcursion,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("repair budget of {budget} steps exhausted with {remaining} crossings left")]
    BudgetExhausted { budget: usize, remaining: usize },

    #[error("infeasible transport matrix: {0}")]
    Constraint(ConstraintViolation),

    #[error("instance size {size} exceeds the limit {limit}")]
    SizeLimit { size: usize, limit: usize },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Short machine-readable tag, used in structured error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "domain",
            Self::InvalidMeasure(_) => "invalid_measure",
            Self::DenominatorMismatch { .. } => "denominator_mismatch",
            Self::Config(_) => "config",
            Self::Parse(_) => "parse",
            Self::HorizonExceeded { .. } => "horizon_exceeded",
            Self::TruncationTooShort(_) => "truncation_too_short",
            Self::EmptyExcursion => "empty_excursion",
            Self::Precondition(_) => "precondition",
            Self::BudgetExhausted { .. } => "budget_exhausted",
            Self::Constraint(_) => "constraint",
            Self::SizeLimit { .. } => "size_limit",
            Self::Io(_) => "io",
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
