//! Few-shot weakly-supervised anomaly detection for network-flow and host
//! telemetry records.
//!
//! The pipeline has three stages:
//!
//! 1. [`ingest`] turns raw CSV tables into dense `[0, 1]` feature matrices and
//!    [`augmentation`] composes training tuples from a tiny labelled anomaly
//!    pool `A` and a large unlabelled pool `U`, each tuple labelled by how many
//!    of its members came from `A`.
//! 2. [`model`] is a shared-weight scoring network: every tuple member passes
//!    through the same sub-network and a linear head scores the concatenated
//!    representation.
//! 3. [`trainer`] fits the network by ordinal regression (mean absolute error
//!    against the tuple labels) and [`inference`] scores a test record by pairing
//!    it with random references from `A` and `U`.
//!
//! [`sampling`], [`evaluation`] and [`experiments`] reproduce the benchmark
//! protocol: disjoint SampleSets, AUROC/TPR/FPR, and mean ± stddev tables.

pub mod augmentation;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod inference;
pub mod ingest;
pub mod model;
pub mod rng;
pub mod sampling;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};

/// Dense row-major feature matrix, one record per row.
pub type FeatureMatrix = ndarray::Array2<f64>;
