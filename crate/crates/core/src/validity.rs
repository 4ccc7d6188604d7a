//! Cluster validity indices and the rule-count sweep.
//!
//! Indices that depend on geometry use the plain Euclidean norm of the
//! clustering space, whatever norm the clustering itself used.

use std::fmt;
use std::io::Write;
use std::ops::RangeInclusive;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::clustering::{run_clustering, Algorithm, ClusterConfig, DataMatrix, PartitionMatrix};
use crate::error::{FuzzyError, Result};

/// Partition coefficient `sum mu^2 / N`. Larger is better.
pub fn pc(u: &PartitionMatrix) -> f64 {
    u.matrix().iter().map(|mu| mu * mu).sum::<f64>() / u.samples() as f64
}

/// Partition entropy with natural log and `0 log 0 = 0`. Smaller is better.
pub fn pe(u: &PartitionMatrix) -> f64 {
    let s: f64 = u
        .matrix()
        .iter()
        .filter(|&&mu| mu > 0.0)
        .map(|&mu| mu * mu.ln())
        .sum();
    -s / u.samples() as f64
}

/// Modified partition coefficient `1 - C/(C-1) (1 - PC)`. Larger is better.
pub fn mpc(u: &PartitionMatrix) -> Result<f64> {
    let c = u.clusters();
    if c < 2 {
        return Err(FuzzyError::invalid("clusters", "MPC needs at least 2 clusters"));
    }
    let c = c as f64;
    Ok(1.0 - c / (c - 1.0) * (1.0 - pc(u)))
}

fn check_inputs(u: &PartitionMatrix, data: &DataMatrix, centers: &[DVector<f64>]) -> Result<()> {
    if u.samples() != data.samples() {
        return Err(FuzzyError::DimensionMismatch {
            expected: data.samples(),
            actual: u.samples(),
        });
    }
    if u.clusters() != centers.len() {
        return Err(FuzzyError::DimensionMismatch {
            expected: u.clusters(),
            actual: centers.len(),
        });
    }
    if centers.len() < 2 {
        return Err(FuzzyError::invalid("clusters", "index needs at least 2 centers"));
    }
    Ok(())
}

/// Per-cluster `sum_k mu_ik^2 |z_k - v_i|^2`.
fn compactness(u: &PartitionMatrix, data: &DataMatrix, centers: &[DVector<f64>]) -> Vec<f64> {
    let samples = data.sample_vectors();
    centers
        .iter()
        .enumerate()
        .map(|(i, v)| {
            samples
                .iter()
                .enumerate()
                .map(|(k, z)| {
                    let mu = u.membership(i, k);
                    mu * mu * (z - v).norm_squared()
                })
                .sum()
        })
        .collect()
}

/// Closest pair of centers `(i, j, |v_i - v_j|^2)` with `i < j`; the first
/// pair in scan order wins ties.
fn closest_pair(centers: &[DVector<f64>]) -> Result<(usize, usize, f64)> {
    let mut best = (0, 1, f64::INFINITY);
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = (&centers[i] - &centers[j]).norm_squared();
            if d < best.2 {
                best = (i, j, d);
            }
        }
    }
    if !(best.2 > 0.0) {
        return Err(FuzzyError::CoincidentCenters {
            first: best.0,
            second: best.1,
        });
    }
    Ok(best)
}

/// Partition index: per-cluster compactness over fuzzy cardinality times
/// the summed separation to every other center. Smaller is better.
pub fn partition_index(
    u: &PartitionMatrix,
    data: &DataMatrix,
    centers: &[DVector<f64>],
) -> Result<f64> {
    check_inputs(u, data, centers)?;
    let comp = compactness(u, data, centers);
    let card = u.cardinalities();
    let mut total = 0.0;
    for (i, vi) in centers.iter().enumerate() {
        let sep: f64 = centers.iter().map(|vj| (vj - vi).norm_squared()).sum();
        if !(sep > 0.0) {
            return Err(FuzzyError::CoincidentCenters {
                first: i,
                second: i,
            });
        }
        if !(card[i] > 0.0) {
            return Err(FuzzyError::EmptyCluster { cluster: i });
        }
        total += comp[i] / (card[i] * sep);
    }
    Ok(total)
}

/// Separation index: total compactness over `N_i` times the minimum squared
/// center separation, with `N_i` the fuzzy cardinality of the lower-indexed
/// cluster of the closest pair. Smaller is better.
pub fn separation_index(
    u: &PartitionMatrix,
    data: &DataMatrix,
    centers: &[DVector<f64>],
) -> Result<f64> {
    check_inputs(u, data, centers)?;
    let (i, _, min_sep) = closest_pair(centers)?;
    let card = u.cardinalities()[i];
    if !(card > 0.0) {
        return Err(FuzzyError::EmptyCluster { cluster: i });
    }
    Ok(compactness(u, data, centers).iter().sum::<f64>() / (card * min_sep))
}

/// Xie-Beni index. Smaller is better.
pub fn xie_beni(u: &PartitionMatrix, data: &DataMatrix, centers: &[DVector<f64>]) -> Result<f64> {
    check_inputs(u, data, centers)?;
    let (_, _, min_sep) = closest_pair(centers)?;
    Ok(compactness(u, data, centers).iter().sum::<f64>() / (data.samples() as f64 * min_sep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValidityIndex {
    Pc,
    Pe,
    Mpc,
    Sc,
    S,
    Xb,
}

impl ValidityIndex {
    pub const ALL: [ValidityIndex; 6] = [
        ValidityIndex::Pc,
        ValidityIndex::Pe,
        ValidityIndex::Mpc,
        ValidityIndex::Sc,
        ValidityIndex::S,
        ValidityIndex::Xb,
    ];

    pub fn maximize(self) -> bool {
        matches!(self, ValidityIndex::Pc | ValidityIndex::Mpc)
    }

    pub fn label(self) -> &'static str {
        match self {
            ValidityIndex::Pc => "PC",
            ValidityIndex::Pe => "PE",
            ValidityIndex::Mpc => "MPC",
            ValidityIndex::Sc => "SC",
            ValidityIndex::S => "S",
            ValidityIndex::Xb => "XB",
        }
    }
}

impl fmt::Display for ValidityIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// All six indices for one partition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexValues {
    pub clusters: usize,
    pub pc: f64,
    pub pe: f64,
    pub mpc: f64,
    pub sc: f64,
    pub s: f64,
    pub xb: f64,
}

impl IndexValues {
    pub fn compute(u: &PartitionMatrix, data: &DataMatrix, centers: &[DVector<f64>]) -> Result<Self> {
        Ok(Self {
            clusters: u.clusters(),
            pc: pc(u),
            pe: pe(u),
            mpc: mpc(u)?,
            sc: partition_index(u, data, centers)?,
            s: separation_index(u, data, centers)?,
            xb: xie_beni(u, data, centers)?,
        })
    }

    pub fn get(&self, index: ValidityIndex) -> f64 {
        match index {
            ValidityIndex::Pc => self.pc,
            ValidityIndex::Pe => self.pe,
            ValidityIndex::Mpc => self.mpc,
            ValidityIndex::Sc => self.sc,
            ValidityIndex::S => self.s,
            ValidityIndex::Xb => self.xb,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidityReport {
    pub algorithm: Algorithm,
    pub rows: Vec<IndexValues>,
    /// Cluster counts whose run failed, with the reason.
    pub failures: Vec<(usize, String)>,
    pub optima: Vec<(ValidityIndex, usize)>,
    pub consensus: usize,
}

impl ValidityReport {
    pub fn optimum(&self, index: ValidityIndex) -> Option<usize> {
        self.optima.iter().find(|(i, _)| *i == index).map(|&(_, c)| c)
    }

    /// Writes `C,PC,PE,MPC,SC,S,XB` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["C", "PC", "PE", "MPC", "SC", "S", "XB"])?;
        for r in &self.rows {
            w.write_record([
                r.clusters.to_string(),
                r.pc.to_string(),
                r.pe.to_string(),
                r.mpc.to_string(),
                r.sc.to_string(),
                r.s.to_string(),
                r.xb.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `index,direction,optimal_C` rows plus the consensus.
    pub fn write_optima_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "direction", "optimal_C"])?;
        for (index, c) in &self.optima {
            let dir = if index.maximize() { "max" } else { "min" };
            w.write_record([index.label(), dir, &c.to_string()])?;
        }
        w.write_record(["consensus", "mode", &self.consensus.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

fn optimum(rows: &[IndexValues], index: ValidityIndex) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for r in rows {
        let v = r.get(index);
        if !v.is_finite() {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, b)) if index.maximize() => v > b,
            Some((_, b)) => v < b,
        };
        if better {
            best = Some((r.clusters, v));
        }
    }
    best.map(|(c, _)| c)
}

/// Most frequent value; ties go to the smallest.
fn mode(values: &[usize]) -> Option<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let mut best: Option<(usize, usize)> = None;
    for chunk in sorted.chunk_by(|a, b| a == b) {
        if best.is_none_or(|(_, n)| chunk.len() > n) {
            best = Some((chunk[0], chunk.len()));
        }
    }
    best.map(|(v, _)| v)
}

/// Clusters the data for every `C` in `range`, scores each partition with
/// the six indices and picks a consensus rule count.
pub fn sweep_clusters(
    data: &DataMatrix,
    template: &ClusterConfig,
    range: RangeInclusive<usize>,
    algorithm: Algorithm,
) -> Result<ValidityReport> {
    let (lo, hi) = (*range.start(), *range.end());
    if lo < 2 || hi < lo {
        return Err(FuzzyError::invalid("cluster_range", "need 2 <= C_min <= C_max"));
    }
    if hi >= data.samples() {
        return Err(FuzzyError::invalid(
            "max_clusters",
            format!("C_max = {hi} must be below the sample count {}", data.samples()),
        ));
    }
    let outcomes: Vec<(usize, Result<IndexValues>)> = range
        .into_par_iter()
        .map(|c| {
            let cfg = template.clone().with_algorithm(algorithm).with_clusters(c);
            let run = || -> Result<IndexValues> {
                let res = run_clustering(data, &cfg)?;
                if res.partition.clusters() != c {
                    return Err(FuzzyError::invalid(
                        "clusters",
                        format!("search found {} centers", res.partition.clusters()),
                    ));
                }
                IndexValues::compute(&res.partition, data, &res.clusters.centers)
            };
            (c, run())
        })
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (c, outcome) in outcomes {
        match outcome {
            Ok(v) => rows.push(v),
            Err(e) => failures.push((c, e.to_string())),
        }
    }
    if rows.is_empty() {
        return Err(FuzzyError::invalid(
            "cluster_range",
            format!("clustering failed for every C: {failures:?}"),
        ));
    }
    let optima: Vec<(ValidityIndex, usize)> = ValidityIndex::ALL
        .iter()
        .filter_map(|&i| optimum(&rows, i).map(|c| (i, c)))
        .collect();
    let votes: Vec<usize> = optima.iter().map(|&(_, c)| c).collect();
    let consensus = mode(&votes).unwrap_or(rows[0].clusters);
    Ok(ValidityReport {
        algorithm,
        rows,
        failures,
        optima,
        consensus,
    })
}
