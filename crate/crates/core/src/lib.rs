//! Takagi-Sugeno fuzzy rainfall-runoff models identified by product-space
//! clustering (Gustafson-Kessel, fuzzy c-means, subtractive clustering).

// `!(x > 0.0)` is used on purpose so NaN lands in the rejecting branch
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod dataio;
pub mod error;
pub mod experiment;
pub mod identify;
pub mod lstsq;
pub mod metrics;
pub mod model;
pub mod validity;

pub use clustering::{run_clustering, Algorithm, ClusterConfig, ClusteringResult, DataMatrix, PartitionMatrix};
pub use error::{ErrorKind, FuzzyError, Result};
pub use identify::{fit_model, FitConfig, FitReport, RuleCount};
pub use metrics::MetricSet;
pub use model::{GaussianMf, TsModel, TsRule};
pub use validity::{sweep_clusters, ValidityIndex, ValidityReport};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
