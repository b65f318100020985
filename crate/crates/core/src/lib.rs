//! Federated learning simulator for bias mitigation on logistic regression.
//!
//! The crate covers the whole experiment pipeline:
//!
//! * [`datasets`] loads the Adult and Compas tables, bins and one-hot encodes
//!   them, and produces a stratified global test set.
//! * [`partition`] splits a training set among simulated parties (stratified
//!   IID, mirrored two-party ratios, or per-party ratio tables).
//! * [`reweighing`] computes reweighing weights locally or from
//!   differentially private global counts.
//! * [`model`] is weighted ℓ2 logistic regression with an optional
//!   prejudice-remover regularizer, trained by full-batch gradient descent.
//! * [`metrics`] evaluates group fairness (SPD, DI, EOD, AOD), accuracy, F1
//!   and the underestimation index.
//! * [`federation`] runs synchronous rounds of local training and fusion and
//!   records every message the aggregator sees.
//! * [`harness`] ties the pieces together behind declarative experiment
//!   configs.

pub mod apportion;
pub mod datasets;
pub mod error;
pub mod federation;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod partition;
pub mod reweighing;
pub mod surrogate;

mod rng;

pub use error::{Error, Result};
