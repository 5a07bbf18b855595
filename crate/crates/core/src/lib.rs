//! Sample-Rank: weak multi-objective recommendation by goal-distribution
//! rejection sampling.
//!
//! The library fits a probability model over the goal-relevant features of
//! session-structured interaction data, tilts the fitted parameters into a
//! postulated "goal distribution", rejection-samples whole sessions toward
//! that goal, trains a pointwise GBT ranker on the sample, and quantifies the
//! relevance-vs-goal trade-off against a model trained on the unsampled data.
//!
//! Module map:
//! - [`data_model`]: session datasets, ingestion, validation, customer splits
//! - [`stats`]: multivariate normal MLE, GMM EM, densities, Mahalanobis
//! - [`goal`]: delta rules turning a fitted model into a goal distribution
//! - [`sampler`]: the modified rejection sampling, at session granularity
//! - [`ranker`]: pointwise gradient-boosted-tree classifier
//! - [`metrics`]: AUC, NDCG, top@k feature means, incremental reports
//! - [`synth`]: synthetic marketplace session generator with known choice model
//! - [`pipeline`]: config-driven experiment runner and report rendering

pub mod data_model;
pub mod error;
pub mod goal;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod ranker;
pub mod sampler;
pub mod stats;
pub mod stream;
pub mod synth;

pub use error::{Error, Result};
