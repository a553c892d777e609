use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// The observation has zero probability under the model.
    #[error("observation impossible under the current model: {0}")]
    ObservationImpossible(String),

    #[error("invalid configuration: field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid assignment: {0}")]
    InvalidAssignment(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;
