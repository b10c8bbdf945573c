//! Model assessment by internal replication.
//!
//! Each assessment reduces data to a sample of values that are iid
//! Uniform(0, 1) exactly when the postulated model holds, then combines them
//! with Fisher's statistic in both tails. Modules:
//!
//! - [`numerics`]: special functions, quadrature, root finding, random streams.
//! - [`replication`]: Fisher combination, two-tailed decisions, 1-D confidence sets.
//! - [`pairs`]: matched-pair exponential models with multiplicative or additive effects.
//! - [`two_group`]: stratified normal, Poisson and gamma comparisons.
//! - [`poisson`]: log-linear Poisson processes and the conditional event-time sum.
//! - [`hazards`]: Cox partial likelihood and the block-score check.
//! - [`confsets`]: confidence sets of sparse regression models.
//! - [`power`]: analytic moments, bounds and power approximations.
//! - [`experiment`]: configuration-driven simulation studies.

// `!(x > 0.0)` is the NaN-rejecting guard throughout; coefficient tables keep
// their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod confsets;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod hazards;
pub mod numerics;
pub mod pairs;
pub mod poisson;
pub mod power;
pub mod replication;
pub mod two_group;

pub use error::{Error, Result};
pub use exec::Execution;
pub use numerics::RngStream;
pub use replication::{assess, AssessmentResult, Direction, USample};
