//! Fair allocation of indivisible goods under matroid-rank valuations.

pub mod audits;
pub mod cli;
pub mod error;
pub mod exchange;
pub mod fairness;
pub mod fixtures;
pub mod goods;
pub mod instances;
pub mod matroid;
pub mod mechanisms;

pub use error::{Error, Result};
pub use goods::{Good, GoodSet, Permutation};
pub use instances::{Agent, Allocation, Instance, ValueVector};
pub use matroid::Valuation;
