use thiserror::Error;

use crate::goods::Good;
use crate::instances::Allocation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed or out-of-range input.
    #[error("invalid input: {0}")]
    Input(String),

    /// An operation was called outside its documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The valuation kind cannot be used by this operation.
    #[error("unsupported valuation kind: {0}")]
    UnsupportedKind(String),

    /// The request exceeds an enumeration or certification bound.
    #[error("capability exceeded: {what} (bound {bound})")]
    Capability { what: String, bound: u128 },

    /// A guarantee that should hold for every matroid failed to hold.
    #[error("internal invariant violated: {0}")]
    Internal(String),

    /// The allocation handed in as Pareto-efficient admits an improvement.
    #[error(
        "allocation is not Pareto-efficient: good {good} can be added to an improved allocation"
    )]
    NotParetoEfficient { good: Good, improved: Allocation },
}

impl Error {
    pub fn is_capability(&self) -> bool {
        matches!(self, Error::Capability { .. })
    }
}
