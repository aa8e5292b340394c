use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },
    #[error("invalid dimension function: {0}")]
    DimFun(String),
    #[error("transfer pair rejected: {0}")]
    Transfer(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("supremum for M is unbounded: {0}")]
    UnboundedSup(String),
    /// A runtime-checked property of a construction failed.
    #[error("property {property} violated: {detail}")]
    Property { property: String, detail: String },
    /// A parameter-selection gate could not be met within the scene.
    #[error("gate {gate} not satisfiable: {detail}")]
    Gate { gate: String, detail: String },
    /// The construction would exceed the configured work budget.
    #[error("construction infeasible ({property}): {detail}")]
    Infeasible { property: String, detail: String },
}

impl Error {
    pub fn property(property: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Property {
            property: property.into(),
            detail: detail.into(),
        }
    }

    pub fn gate(gate: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Gate {
            gate: gate.into(),
            detail: detail.into(),
        }
    }

    /// Name of the property or gate this error refers to, if any.
    pub fn named_property(&self) -> Option<&str> {
        match self {
            Error::Property { property, .. } | Error::Infeasible { property, .. } => Some(property),
            Error::Gate { gate, .. } => Some(gate),
            _ => None,
        }
    }
}
