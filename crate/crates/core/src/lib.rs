//! Numerical core for benchmarking a hybrid boosted-trees + neural-network
//! consumer-default model against a credit score, and for auditing the
//! resulting rankings for fairness.
//!
//! The crate is `no_std` and needs only `alloc`. Everything that touches the
//! filesystem (CSV panels, JSON model files, the CLI) lives in the companion
//! `credit-audit` crate.
//!
//! Module map:
//! - [`panel`]: credit-panel data model, default labels, transition statistics,
//!   synthetic panel generation.
//! - [`model`]: gradient-boosted trees, feed-forward network, ensemble weight
//!   selection and temporal cross-validation.
//! - [`metrics`]: AUC, Gini, Spearman, Kendall tau-b, percentile rankings,
//!   calibration tables.
//! - [`profiles`]: industry risk profiles, disagreement matrix, default rate by
//!   cell.
//! - [`attribution`]: Shapley attribution (exact and permutation-sampled) and
//!   the five feature-group shares.
//! - [`equity`]: fixed-effects OLS with cluster-robust errors, group AUCs,
//!   feature-composition counterfactuals and access-to-credit regressions.
//! - [`costs`]: credit-card and mortgage interest-cost deltas.
//! - [`linkage`]: bureau/HMDA exact-match pipeline and BISG race proxy.
#![no_std]
#![deny(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attribution;
pub mod costs;
pub mod equity;
mod error;
pub mod features;
mod linalg;
pub mod linkage;
pub mod metrics;
pub mod model;
pub mod panel;
pub mod profiles;
pub mod rng;

pub use error::{Error, Result};
pub use features::{FeatureGroup, FeatureSemantics, FeatureVector, N_FEATURES};
pub use panel::{ConsumerQuarter, Panel, Race};

/// Crate version, recorded in run manifests and model files.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
