//! Fuzzy partitioning of the joined input-output space.
//!
//! Three algorithms produce a [`PartitionMatrix`]: Gustafson-Kessel with its
//! per-cluster adaptive norm, fuzzy c-means (the same iteration with the norm
//! pinned to the identity) and subtractive clustering, a one-pass
//! density-peak search whose centers are turned into memberships afterwards.

mod fuzzy;
mod subtractive;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FuzzyError, Result};

pub use fuzzy::{
    fuzzy_scatter, gk_distance, init_partition, norm_matrix, objective, run_fcm, run_gk,
    update_centers, update_covariances, update_memberships,
};
pub use subtractive::{run_sc, sc_clustering, SubtractiveOutcome};

/// Unit hyper-volume for every GK cluster.
pub const GK_VOLUME: f64 = 1.0;

/// Tolerance for the column-sum constraint of a partition matrix.
pub const COLUMN_SUM_TOLERANCE: f64 = 1e-9;

/// `N` samples of the joined vectors `[x_1 .. x_n, y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: DMatrix<f64>,
    columns: Vec<String>,
}

impl DataMatrix {
    pub fn new(data: DMatrix<f64>, columns: Vec<String>) -> Result<Self> {
        if columns.len() != data.ncols() {
            return Err(FuzzyError::DimensionMismatch {
                expected: data.ncols(),
                actual: columns.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(FuzzyError::NonFinite {
                context: "data matrix".into(),
            });
        }
        Ok(Self { data, columns })
    }

    /// Data matrix with generic column names `z0, z1, ..`.
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        let columns = (0..data.ncols()).map(|j| format!("z{j}")).collect();
        Self::new(data, columns)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
            return Err(FuzzyError::DimensionMismatch {
                expected: ncols,
                actual: bad.len(),
            });
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_matrix(DMatrix::from_row_slice(rows.len(), ncols, &flat))
    }

    /// Joins an `N x n` input matrix with the output column.
    pub fn join(inputs: &DMatrix<f64>, outputs: &[f64]) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return Err(FuzzyError::DimensionMismatch {
                expected: inputs.nrows(),
                actual: outputs.len(),
            });
        }
        let n = inputs.ncols();
        let mut data = inputs.clone().insert_column(n, 0.0);
        data.column_mut(n).copy_from_slice(outputs);
        let mut columns: Vec<String> = (0..n).map(|j| format!("x{}", j + 1)).collect();
        columns.push("y".into());
        Self::new(data, columns)
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn sample(&self, k: usize) -> DVector<f64> {
        self.data.row(k).transpose()
    }

    pub(crate) fn sample_vectors(&self) -> Vec<DVector<f64>> {
        (0..self.samples()).map(|k| self.sample(k)).collect()
    }

    /// Per-column `(min, max)`.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.data
            .column_iter()
            .map(|c| (c.min(), c.max()))
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            data: &self.data * factor,
            columns: self.columns.clone(),
        }
    }
}

/// `C x N` fuzzy membership matrix; every column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionMatrix {
    u: DMatrix<f64>,
}

impl PartitionMatrix {
    /// Validates entries in `[0, 1]` and unit column sums.
    pub fn new(u: DMatrix<f64>) -> Result<Self> {
        if u.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(FuzzyError::invalid(
                "partition",
                "memberships must lie in [0, 1]",
            ));
        }
        for (k, col) in u.column_iter().enumerate() {
            if (col.sum() - 1.0).abs() > COLUMN_SUM_TOLERANCE {
                return Err(FuzzyError::invalid(
                    "partition",
                    format!("column {k} sums to {}", col.sum()),
                ));
            }
        }
        Ok(Self { u })
    }

    pub(crate) fn from_raw(u: DMatrix<f64>) -> Self {
        Self { u }
    }

    pub fn clusters(&self) -> usize {
        self.u.nrows()
    }

    pub fn samples(&self) -> usize {
        self.u.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn membership(&self, cluster: usize, sample: usize) -> f64 {
        self.u[(cluster, sample)]
    }

    /// Fuzzy cardinality of every cluster.
    pub fn cardinalities(&self) -> Vec<f64> {
        self.u.row_iter().map(|r| r.sum()).collect()
    }

    /// True when no cluster is empty and none absorbs every sample.
    pub fn is_proper(&self) -> bool {
        let n = self.samples() as f64;
        self.cardinalities().iter().all(|&s| s > 0.0 && s < n)
    }

    /// Largest absolute entry-wise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.u
            .iter()
            .zip(other.u.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Reorders the clusters: row `i` of the result is row `order[i]` of self.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut u = DMatrix::zeros(self.clusters(), self.samples());
        for (dst, &src) in order.iter().enumerate() {
            u.set_row(dst, &self.u.row(src));
        }
        Self { u }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "GK")]
    Gk,
    #[serde(rename = "FCM")]
    Fcm,
    #[serde(rename = "SC")]
    Sc,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gk, Algorithm::Fcm, Algorithm::Sc];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::Gk => "GK",
            Algorithm::Fcm => "FCM",
            Algorithm::Sc => "SC",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = FuzzyError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "GK" => Ok(Algorithm::Gk),
            "FCM" => Ok(Algorithm::Fcm),
            "SC" => Ok(Algorithm::Sc),
            other => Err(FuzzyError::invalid(
                "algorithm",
                format!("unknown algorithm `{other}` (expected GK, FCM or SC)"),
            )),
        }
    }
}

/// Subtractive clustering parameters, applied on min-max normalized data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubtractiveParams {
    pub radius: f64,
    pub squash: f64,
    pub accept_ratio: f64,
    pub reject_ratio: f64,
    /// Stop once this many centers are accepted.
    pub max_centers: Option<usize>,
}

impl Default for SubtractiveParams {
    fn default() -> Self {
        Self {
            radius: 0.5,
            squash: 1.25,
            accept_ratio: 0.5,
            reject_ratio: 0.15,
            max_centers: None,
        }
    }
}

impl SubtractiveParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(FuzzyError::invalid("radius", "must lie in (0, 1]"));
        }
        if !(self.squash > 0.0 && self.squash.is_finite()) {
            return Err(FuzzyError::invalid("squash", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.reject_ratio)
            || !(0.0..=1.0).contains(&self.accept_ratio)
            || self.reject_ratio > self.accept_ratio
        {
            return Err(FuzzyError::invalid(
                "accept_ratio",
                "need 0 <= reject_ratio <= accept_ratio <= 1",
            ));
        }
        if self.max_centers == Some(0) {
            return Err(FuzzyError::invalid("max_centers", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub algorithm: Algorithm,
    pub clusters: usize,
    /// Fuzziness exponent `m`.
    pub fuzziness: f64,
    /// Termination threshold on the max-abs change of the partition.
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Blend weight toward a scaled identity for GK covariances.
    pub regularization: f64,
    pub subtractive: SubtractiveParams,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Gk,
            clusters: 3,
            fuzziness: 2.0,
            tolerance: 1e-3,
            max_iter: 200,
            seed: 0,
            regularization: 1e-3,
            subtractive: SubtractiveParams::default(),
        }
    }
}

impl ClusterConfig {
    pub fn with_algorithm(mut self, algorithm: Algorithm) -> Self {
        self.algorithm = algorithm;
        self
    }

    pub fn with_clusters(mut self, clusters: usize) -> Self {
        self.clusters = clusters;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_regularization(mut self, gamma: f64) -> Self {
        self.regularization = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fuzziness > 1.0 && self.fuzziness.is_finite()) {
            return Err(FuzzyError::invalid("fuzziness", "m must be finite and > 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(FuzzyError::invalid("tolerance", "must be > 0"));
        }
        if self.clusters < 2 {
            return Err(FuzzyError::invalid("clusters", "need at least 2 clusters"));
        }
        if self.max_iter == 0 {
            return Err(FuzzyError::invalid("max_iter", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.regularization) {
            return Err(FuzzyError::invalid("regularization", "must lie in [0, 1]"));
        }
        self.subtractive.validate()
    }
}

/// Cluster prototypes with their covariances and induced norm matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub centers: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
    pub norms: Vec<DMatrix<f64>>,
    pub volume: f64,
}

impl ClusterSet {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub converged: bool,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Writes `iteration,objective,delta_u,converged` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iteration", "objective", "delta_u", "converged"])?;
        let last = self.records.len();
        for r in &self.records {
            let converged = self.converged && r.iteration == last;
            w.write_record([
                r.iteration.to_string(),
                r.objective.to_string(),
                r.delta.to_string(),
                converged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub partition: PartitionMatrix,
    pub clusters: ClusterSet,
    pub trace: IterationTrace,
}

/// Runs the algorithm selected in `cfg`.
pub fn run_clustering(data: &DataMatrix, cfg: &ClusterConfig) -> Result<ClusteringResult> {
    match cfg.algorithm {
        Algorithm::Gk => run_gk(data, cfg),
        Algorithm::Fcm => run_fcm(data, cfg),
        Algorithm::Sc => sc_clustering(data, cfg),
    }
}
