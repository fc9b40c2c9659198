use thiserror::Error;

use crate::instance::ValidationReport;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed instance document: {0}")]
    Parse(#[source] serde_json::Error),
    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("basis factorization found no pivot above {floor:e}")]
    NumericalBreakdown { floor: f64 },
    #[error("simplex iteration limit {0} reached")]
    IterationLimit(usize),
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("expansion qualities differ from q(y_t) by {deviation:e} (pool {pool}, attribute {attribute})")]
    QualityMismatch { pool: usize, attribute: usize, deviation: f64 },
    #[error("vector length {found} does not match expected {expected}")]
    Shape { expected: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error("initial multicommodity flow problem is {0}")]
    Initialization(&'static str),
    #[error("invalid solver configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("grid of {points} points exceeds the budget of {budget}")]
    BudgetExceeded { points: f64, budget: f64 },
    #[error("flow on arc {arc} has no finite upper bound")]
    Unbounded { arc: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error("relaxation LP finished with status {0:?}")]
    Status(crate::lp::LpStatus),
}
