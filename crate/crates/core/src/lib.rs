//! Cardinality estimation laboratory.
//!
//! This crate bundles everything needed to benchmark single-table
//! cardinality estimators under one roof:
//!
//! - a columnar [`table::Table`] with dictionary encoding and an exact
//!   full-scan counting oracle,
//! - a seeded workload generator ([`workload`]) and a synthetic dataset
//!   generator with controllable skew/correlation/domain size ([`synth`]),
//! - eight estimators behind the common [`estimator::Estimator`] trait:
//!   uniform sampling (two flavors), per-column equi-depth histograms
//!   combined under the independence assumption, a MaxDiff multidimensional
//!   histogram, Gaussian KDE, a Chow-Liu tree with progressive sampling,
//!   a gradient-boosted-tree regressor over query features, and a small
//!   masked autoregressive network,
//! - q-error analytics ([`estimator::summarize`]), a dynamic-environment
//!   simulator ([`dynamic`]), and a logical-rule checker ([`rules`]).
//!
//! Everything is seed-deterministic: identical inputs and seeds produce
//! identical outputs, including the stochastic estimators.

pub mod dynamic;
pub mod error;
pub mod estimator;
pub mod learned;
pub mod model_io;
pub mod query;
pub mod registry;
pub mod report;
pub mod rules;
pub mod stats;
pub mod synth;
pub mod table;
pub mod traditional;
pub mod workload;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
