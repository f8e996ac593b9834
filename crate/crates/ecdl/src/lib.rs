//! Ensemble of Clustered Desparsified Lasso.
//!
//! Statistical inference for high-dimensional linear models with spatially
//! structured predictors: desparsified-Lasso p-values and confidence
//! intervals, connectivity-constrained Ward clustering for dimension
//! reduction, and a subsample-randomized ensemble whose aggregated p-values
//! stay valid frequentist tests.
//!
//! The data-parallel stages (nodewise regressions, ensemble repetitions,
//! batch simulation) run on rayon under the default `parallel` feature and
//! fall back to sequential loops without it, with identical output.

pub mod clustering;
pub mod error;
pub mod inference;
pub mod lasso;
pub mod parallel;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};
