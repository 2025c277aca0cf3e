//! Fairness-aware learning through subgroup risk aggregation.
//!
//! Per-group losses are treated as a discrete random variable and collapsed
//! into one number by a risk measure (expectation, CVaR, a standard-deviation
//! penalty, top-k averaging or the worst case). Training minimizes that
//! aggregate for a linear classifier; the same machinery yields inequality
//! measures over income-like vectors.

pub mod cli;
pub mod data;
pub mod error;
pub mod inequality;
pub mod metrics;
pub mod optim;
pub mod riskvar;
pub mod subgroup;

pub use error::{Error, Result};
