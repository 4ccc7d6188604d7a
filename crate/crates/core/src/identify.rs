//! Builds a [`TsModel`] from a fuzzy partition of the joined data.
//!
//! Premise Gaussians are projected from the partition onto each input axis;
//! consequents come from one global least-squares problem whose regressors
//! are the inputs weighted by the normalized rule truth values.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::clustering::{
    run_clustering, run_sc, Algorithm, ClusterConfig, DataMatrix, IterationTrace, PartitionMatrix,
    SubtractiveParams,
};
use crate::error::{FuzzyError, Result};
use crate::lstsq::{lstsq, LeastSquares};
use crate::metrics::MetricSet;
use crate::model::{GaussianMf, TsModel, TsRule};
use crate::validity::{sweep_clusters, ValidityReport};

/// Relative floor for premise widths, as a fraction of the column range.
pub const WIDTH_FLOOR: f64 = 1e-6;

fn input_dim(data: &DataMatrix) -> Result<usize> {
    if data.dim() < 2 {
        return Err(FuzzyError::invalid(
            "data",
            "joined data needs at least one input and the output column",
        ));
    }
    Ok(data.dim() - 1)
}

fn membership_mass(u: &PartitionMatrix, fuzziness: f64) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let w = u.matrix().map(|mu| mu.powf(fuzziness));
    let mass: Vec<f64> = w.row_iter().map(|r| r.sum()).collect();
    if let Some(i) = mass.iter().position(|m| !(*m > 0.0)) {
        return Err(FuzzyError::EmptyCluster { cluster: i });
    }
    Ok((w, mass))
}

/// `C x n` premise means `sum_k mu^m x_kj / sum_k mu^m` over the input columns.
pub fn premise_means(data: &DataMatrix, u: &PartitionMatrix, fuzziness: f64) -> Result<DMatrix<f64>> {
    let n = input_dim(data)?;
    let (w, mass) = membership_mass(u, fuzziness)?;
    let x = data.matrix();
    Ok(DMatrix::from_fn(u.clusters(), n, |i, j| {
        (0..data.samples()).map(|k| w[(i, k)] * x[(k, j)]).sum::<f64>() / mass[i]
    }))
}

/// `C x n` premise widths `sqrt(2 sum_k mu^m (x_kj - mean)^2 / sum_k mu^m)`,
/// floored at [`WIDTH_FLOOR`] times the column range.
pub fn premise_widths(
    data: &DataMatrix,
    u: &PartitionMatrix,
    fuzziness: f64,
    means: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = input_dim(data)?;
    let (w, mass) = membership_mass(u, fuzziness)?;
    let x = data.matrix();
    let floors: Vec<f64> = data
        .bounds()
        .iter()
        .take(n)
        .map(|(lo, hi)| {
            let range = hi - lo;
            WIDTH_FLOOR * if range > 0.0 { range } else { 1.0 }
        })
        .collect();
    Ok(DMatrix::from_fn(u.clusters(), n, |i, j| {
        let spread: f64 = (0..data.samples())
            .map(|k| {
                let d = x[(k, j)] - means[(i, j)];
                w[(i, k)] * d * d
            })
            .sum();
        (2.0 * spread / mass[i]).sqrt().max(floors[j])
    }))
}

/// Rule premises from mean and width matrices.
pub fn build_premises(means: &DMatrix<f64>, widths: &DMatrix<f64>) -> Result<Vec<Vec<GaussianMf>>> {
    (0..means.nrows())
        .map(|i| {
            (0..means.ncols())
                .map(|j| GaussianMf::new(means[(i, j)], widths[(i, j)]))
                .collect()
        })
        .collect()
}

fn premise_model(premises: &[Vec<GaussianMf>]) -> Result<TsModel> {
    let rules = premises
        .iter()
        .map(|p| TsRule::new(p.clone(), vec![0.0; p.len() + 1]))
        .collect::<Result<Vec<_>>>()?;
    TsModel::new(rules)
}

/// Normalized truth values, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthMatrix {
    pub values: DMatrix<f64>,
    /// Rows whose firing vector was degenerate and fell back to one-hot.
    pub degenerate_rows: Vec<usize>,
}

pub fn normalized_truth(premises: &[Vec<GaussianMf>], inputs: &DMatrix<f64>) -> Result<TruthMatrix> {
    let model = premise_model(premises)?;
    let mut values = DMatrix::zeros(inputs.nrows(), model.rule_count());
    let mut degenerate_rows = Vec::new();
    let mut x = vec![0.0; inputs.ncols()];
    for k in 0..inputs.nrows() {
        for (j, v) in x.iter_mut().enumerate() {
            *v = inputs[(k, j)];
        }
        let (row, degenerate) = model.normalized_firing(&x).map_err(|e| e.at_row(k))?;
        if degenerate {
            degenerate_rows.push(k);
        }
        for (i, v) in row.into_iter().enumerate() {
            values[(k, i)] = v;
        }
    }
    Ok(TruthMatrix {
        values,
        degenerate_rows,
    })
}

/// Row `k` is `[t_1k [1 x_k], .., t_Ck [1 x_k]]`.
pub fn build_regressors(inputs: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if inputs.nrows() != truth.nrows() {
        return Err(FuzzyError::DimensionMismatch {
            expected: inputs.nrows(),
            actual: truth.nrows(),
        });
    }
    let n = inputs.ncols();
    let block = n + 1;
    Ok(DMatrix::from_fn(inputs.nrows(), truth.ncols() * block, |k, col| {
        let (i, j) = (col / block, col % block);
        let t = truth[(k, i)];
        if j == 0 {
            t
        } else {
            t * inputs[(k, j - 1)]
        }
    }))
}

/// Stacked consequent coefficients from the global regression.
pub fn solve_consequents(regressors: &DMatrix<f64>, targets: &DVector<f64>) -> Result<LeastSquares> {
    lstsq(regressors, targets)
}

/// How the number of rules is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleCount {
    Fixed(usize),
    /// Sweep `C = 2..=max` and take the validity consensus.
    Sweep { max: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub clustering: ClusterConfig,
    pub rules: RuleCount,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            clustering: ClusterConfig::default(),
            rules: RuleCount::Fixed(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub algorithm: Algorithm,
    pub rules: usize,
    pub iterations: usize,
    pub converged: bool,
    pub training: MetricSet,
    pub residual_norm: f64,
    pub rank: usize,
    pub degenerate_rows: usize,
    pub sweep: Option<ValidityReport>,
    pub trace: IterationTrace,
}

impl FitReport {
    pub const CSV_HEADER: [&'static str; 11] = [
        "algorithm",
        "rules",
        "iterations",
        "converged",
        "RMSE",
        "VE",
        "CE",
        "R",
        "residual_norm",
        "rank",
        "degenerate_rows",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.algorithm.to_string(),
            self.rules.to_string(),
            self.iterations.to_string(),
            self.converged.to_string(),
            self.training.rmse.to_string(),
            self.training.ve.to_string(),
            self.training.ce.to_string(),
            self.training.r.to_string(),
            self.residual_norm.to_string(),
            self.rank.to_string(),
            self.degenerate_rows.to_string(),
        ]
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::CSV_HEADER)?;
        w.write_record(self.csv_record())?;
        w.flush()?;
        Ok(())
    }
}

/// Splits the joined data into inputs and the output column.
pub fn split_joined(data: &DataMatrix) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = input_dim(data)?;
    let m = data.matrix();
    Ok((m.columns(0, n).into_owned(), m.column(n).into_owned()))
}

/// Turns a partition of the joined data into a model.
pub fn model_from_partition(
    data: &DataMatrix,
    u: &PartitionMatrix,
    fuzziness: f64,
) -> Result<(TsModel, LeastSquares, TruthMatrix)> {
    let means = premise_means(data, u, fuzziness).map_err(|e| e.in_stage("premise means"))?;
    let widths =
        premise_widths(data, u, fuzziness, &means).map_err(|e| e.in_stage("premise widths"))?;
    let premises = build_premises(&means, &widths).map_err(|e| e.in_stage("premises"))?;
    let (inputs, targets) = split_joined(data)?;
    let truth = normalized_truth(&premises, &inputs).map_err(|e| e.in_stage("truth values"))?;
    let pi = build_regressors(&inputs, &truth.values)?;
    let ls = solve_consequents(&pi, &targets).map_err(|e| e.in_stage("consequents"))?;
    let block = inputs.ncols() + 1;
    let rules = premises
        .into_iter()
        .enumerate()
        .map(|(i, p)| TsRule::new(p, ls.solution.rows(i * block, block).iter().copied().collect()))
        .collect::<Result<Vec<_>>>()?;
    Ok((TsModel::new(rules)?, ls, truth))
}

/// Clustering, premise estimation and consequent regression in one pass.
pub fn fit_model(data: &DataMatrix, cfg: &FitConfig) -> Result<(TsModel, FitReport)> {
    let (clusters, sweep) = match cfg.rules {
        RuleCount::Fixed(c) => (c, None),
        // subtractive clustering picks its own count
        RuleCount::Sweep { max } if cfg.clustering.algorithm == Algorithm::Sc => {
            let params = SubtractiveParams {
                max_centers: None,
                ..cfg.clustering.subtractive
            };
            let found = run_sc(data, &params).map_err(|e| e.in_stage("subtractive search"))?;
            (found.effective_clusters().min(max), None)
        }
        RuleCount::Sweep { max } => {
            let report = sweep_clusters(data, &cfg.clustering, 2..=max, cfg.clustering.algorithm)
                .map_err(|e| e.in_stage("rule-count sweep"))?;
            (report.consensus, Some(report))
        }
    };
    let ccfg = cfg.clustering.clone().with_clusters(clusters);
    let result = run_clustering(data, &ccfg).map_err(|e| e.in_stage("clustering"))?;
    let (model, ls, truth) = model_from_partition(data, &result.partition, ccfg.fuzziness)?;

    let (inputs, targets) = split_joined(data)?;
    let fitted = model.predict_batch(&inputs).map_err(|e| e.in_stage("training prediction"))?;
    let training = MetricSet::evaluate(targets.as_slice(), &fitted.values)?;
    Ok((
        model,
        FitReport {
            algorithm: ccfg.algorithm,
            rules: result.partition.clusters(),
            iterations: result.trace.iterations(),
            converged: result.trace.converged,
            training,
            residual_norm: ls.residual_norm,
            rank: ls.rank,
            degenerate_rows: truth.degenerate_rows.len(),
            sweep,
            trace: result.trace,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Algorithm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn part(c: usize, n: usize, v: &[f64]) -> PartitionMatrix {
        PartitionMatrix::new(DMatrix::from_row_slice(c, n, v)).unwrap()
    }

    #[test]
    fn premise_mean_examples() {
        let d = DataMatrix::from_rows(&[vec![0.0, 5.0], vec![2.0, 7.0]]).unwrap();
        let single = PartitionMatrix::new(DMatrix::from_element(1, 2, 1.0)).unwrap();
        assert_eq!(premise_means(&d, &single, 2.0).unwrap()[(0, 0)], 1.0);

        let d3 = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 0.0], vec![6.0, 0.0]]).unwrap();
        let equal = PartitionMatrix::new(DMatrix::from_element(2, 3, 0.5)).unwrap();
        let means = premise_means(&d3, &equal, 2.0).unwrap();
        assert!((means[(0, 0)] - 3.0).abs() < 1e-15 && (means[(1, 0)] - 3.0).abs() < 1e-15);

        let d2 = DataMatrix::from_rows(&[vec![0.0, 1.0], vec![4.0, 1.0]]).unwrap();
        let u = part(2, 2, &[1.0, 0.5, 0.0, 0.5]);
        assert!((premise_means(&d2, &u, 2.0).unwrap()[(0, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn premise_width_examples() {
        let d = DataMatrix::from_rows(&[vec![0.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let single = PartitionMatrix::new(DMatrix::from_element(1, 2, 1.0)).unwrap();
        let means = premise_means(&d, &single, 2.0).unwrap();
        let w = premise_widths(&d, &single, 2.0, &means).unwrap();
        assert!((w[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);

        let d = DataMatrix::from_rows(&[vec![-1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let w = premise_widths(&d, &single, 2.0, &DMatrix::zeros(1, 1)).unwrap();
        assert!((w[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);

        let flat = DataMatrix::from_rows(&[vec![3.0, 1.0], vec![3.0, 2.0]]).unwrap();
        let means = premise_means(&flat, &single, 2.0).unwrap();
        let w = premise_widths(&flat, &single, 2.0, &means).unwrap();
        assert_eq!(w[(0, 0)], WIDTH_FLOOR);
    }

    #[test]
    fn normalized_truth_examples() {
        let mf = |m| GaussianMf::new(m, 1.0).unwrap();
        let premises = vec![vec![mf(0.0)], vec![mf(100.0)]];
        let t = normalized_truth(&premises, &DMatrix::from_row_slice(1, 1, &[0.0])).unwrap();
        assert!((t.values[(0, 0)] - 1.0).abs() < 1e-12);

        let premises = vec![vec![mf(-1.0)], vec![mf(1.0)]];
        let t = normalized_truth(&premises, &DMatrix::from_row_slice(2, 1, &[0.0, 0.3])).unwrap();
        assert!((t.values[(0, 0)] - 0.5).abs() < 1e-15);
        for row in t.values.row_iter() {
            assert!((row.sum() - 1.0).abs() <= 1e-12);
        }

        let far = normalized_truth(&premises, &DMatrix::from_row_slice(1, 1, &[1e4])).unwrap();
        assert_eq!(far.degenerate_rows, vec![0]);
        assert_eq!(far.values.row(0).iter().copied().collect::<Vec<_>>(), vec![0.0, 1.0]);
    }

    #[test]
    fn regressor_examples() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 4.0, 5.0, 6.0]);
        let one = build_regressors(&x, &DMatrix::from_element(2, 1, 1.0)).unwrap();
        assert_eq!(one.row(0).iter().copied().collect::<Vec<_>>(), vec![1.0, 3.0, 4.0]);

        let x = DMatrix::from_row_slice(1, 1, &[2.0]);
        let pi = build_regressors(&x, &DMatrix::from_row_slice(1, 2, &[0.5, 0.5])).unwrap();
        assert_eq!(pi.as_slice(), &[0.5, 1.0, 0.5, 1.0]);

        let zero = DMatrix::zeros(1, 2);
        let pi = build_regressors(&zero, &DMatrix::from_row_slice(1, 2, &[0.3, 0.7])).unwrap();
        assert_eq!(pi.row(0).iter().copied().collect::<Vec<_>>(), vec![0.3, 0.0, 0.0, 0.7, 0.0, 0.0]);
    }

    #[test]
    fn zero_regressors_are_rejected() {
        let pi = DMatrix::zeros(4, 2);
        assert!(matches!(
            solve_consequents(&pi, &DVector::from_element(4, 1.0)),
            Err(FuzzyError::ZeroRegressors)
        ));
    }

    #[test]
    fn least_squares_beats_perturbed_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pi = DMatrix::from_fn(30, 6, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(30, |_, _| rng.random_range(-1.0..1.0));
        let ls = solve_consequents(&pi, &y).unwrap();
        for _ in 0..100 {
            let delta = DVector::from_fn(6, |_, _| rng.random_range(-0.1..0.1));
            let other = (&y - &pi * (&ls.solution + delta)).norm();
            assert!(ls.residual_norm <= other + 1e-12);
        }
    }

    /// Ten samples, one rule: the fit must match ordinary affine least
    /// squares from the normal equations.
    #[test]
    fn single_rule_reduces_to_affine_regression() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                vec![a, b, 0.5 + 2.0 * a - b + rng.random_range(-0.1..0.1)]
            })
            .collect();
        let d = DataMatrix::from_rows(&rows).unwrap();
        let u = PartitionMatrix::new(DMatrix::from_element(1, 10, 1.0)).unwrap();
        let (model, _, _) = model_from_partition(&d, &u, 2.0).unwrap();

        let x = DMatrix::from_fn(10, 3, |k, j| if j == 0 { 1.0 } else { rows[k][j - 1] });
        let y = DVector::from_fn(10, |k, _| rows[k][2]);
        let xtx = x.transpose() * &x;
        let oracle = xtx.try_inverse().unwrap() * x.transpose() * y;
        let got = model.rules()[0].consequent();
        for j in 0..3 {
            assert!((got[j] - oracle[j]).abs() < 1e-8);
        }
    }

    #[test]
    fn refit_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|_| {
                let a: f64 = rng.random_range(0.0..4.0);
                vec![a, a.sin()]
            })
            .collect();
        let d = DataMatrix::from_rows(&rows).unwrap();
        let cfg = FitConfig {
            clustering: ClusterConfig::default().with_algorithm(Algorithm::Gk),
            rules: RuleCount::Fixed(3),
        };
        let (a, ra) = fit_model(&d, &cfg).unwrap();
        let (b, rb) = fit_model(&d, &cfg).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert_eq!(ra, rb);
        assert!(a.rules().iter().flat_map(|r| r.premise()).all(|mf| mf.width() > 0.0));
    }
}
