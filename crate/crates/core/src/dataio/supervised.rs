use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::EventSeries;
use crate::clustering::DataMatrix;
use crate::error::{FuzzyError, Result};

/// Column names of a supervised set: the M4 inputs followed by the target.
pub const SUPERVISED_COLUMNS: [&str; 5] = ["head_prev", "rain1", "rain2", "rain3", "head"];

/// Index of the target column in a [`NormalizationRecord`].
pub const TARGET_COLUMN: usize = 4;

/// Per-column min-max scaling, or none at all.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NormalizationRecord {
    Dimensional,
    MinMax { min: Vec<f64>, max: Vec<f64> },
}

impl NormalizationRecord {
    /// Min-max statistics of each column. Constant columns are rejected.
    pub fn fit(columns: &[&[f64]]) -> Result<Self> {
        let mut min = Vec::with_capacity(columns.len());
        let mut max = Vec::with_capacity(columns.len());
        for (j, col) in columns.iter().enumerate() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if !(hi > lo) {
                return Err(FuzzyError::DegenerateSeries(format!(
                    "column {j} is constant and cannot be normalized"
                )));
            }
            min.push(lo);
            max.push(hi);
        }
        Ok(Self::MinMax { min, max })
    }

    pub fn is_dimensional(&self) -> bool {
        matches!(self, Self::Dimensional)
    }

    /// Maps `v` in column `j`; the flag is set when `v` lies outside the
    /// fitted range.
    pub fn apply(&self, j: usize, v: f64) -> (f64, bool) {
        match self {
            Self::Dimensional => (v, false),
            Self::MinMax { min, max } => {
                let out = v < min[j] || v > max[j];
                ((v - min[j]) / (max[j] - min[j]), out)
            }
        }
    }

    /// Inverse of [`NormalizationRecord::apply`]; flags values outside `[0, 1]`.
    pub fn invert(&self, j: usize, v: f64) -> (f64, bool) {
        match self {
            Self::Dimensional => (v, false),
            Self::MinMax { min, max } => (min[j] + v * (max[j] - min[j]), !(0.0..=1.0).contains(&v)),
        }
    }

    /// Applies column `j` to every value; returns the mapped values and the
    /// number of out-of-range entries.
    pub fn apply_column(&self, j: usize, values: &[f64]) -> (Vec<f64>, usize) {
        map_flagged(values, |v| self.apply(j, v))
    }

    pub fn invert_column(&self, j: usize, values: &[f64]) -> (Vec<f64>, usize) {
        map_flagged(values, |v| self.invert(j, v))
    }
}

fn map_flagged(values: &[f64], f: impl Fn(f64) -> (f64, bool)) -> (Vec<f64>, usize) {
    let mut flagged = 0;
    let out = values
        .iter()
        .map(|&v| {
            let (m, out) = f(v);
            flagged += out as usize;
            m
        })
        .collect();
    (out, flagged)
}

/// How [`build_supervised`] scales the columns.
#[derive(Debug, Clone, PartialEq)]
pub enum Normalization {
    Dimensional,
    /// Fit min-max statistics on this set.
    Fit,
    /// Reuse statistics fitted on a training set.
    Apply(NormalizationRecord),
}

/// M4 regression rows `[y_{k-s}, r1_{k-L}, r2_{k-L}, r3_{k-L}] -> y_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSet {
    pub inputs: DMatrix<f64>,
    pub targets: Vec<f64>,
    pub stride: usize,
    pub lag: usize,
    pub normalization: NormalizationRecord,
    /// Values outside the training range after applying a stored record.
    pub out_of_range: usize,
}

impl SupervisedSet {
    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    /// Joined clustering space `[x; y]`.
    pub fn joined(&self) -> Result<DataMatrix> {
        let mut data = self.inputs.clone().insert_column(4, 0.0);
        data.column_mut(4).copy_from_slice(&self.targets);
        DataMatrix::new(data, SUPERVISED_COLUMNS.iter().map(|s| s.to_string()).collect())
    }

    /// Target-column values mapped back to physical units.
    pub fn denormalize_targets(&self, values: &[f64]) -> (Vec<f64>, usize) {
        self.normalization.invert_column(TARGET_COLUMN, values)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUPERVISED_COLUMNS)?;
        for k in 0..self.rows() {
            let mut rec: Vec<String> = (0..4).map(|j| self.inputs[(k, j)].to_string()).collect();
            rec.push(self.targets[k].to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Prediction horizon in seconds for a stride on the given base interval.
pub fn scheme_seconds(stride: usize, interval: f64) -> f64 {
    stride as f64 * interval
}

/// Builds the strided, lag-aligned M4 rows. Row `k` pairs the target
/// `y_k` with `y_{k - stride}` and the rainfall shifted forward by `lag`.
pub fn build_supervised(
    series: &EventSeries,
    lag: usize,
    stride: usize,
    normalization: Normalization,
) -> Result<SupervisedSet> {
    if stride == 0 {
        return Err(FuzzyError::invalid("stride", "must be at least 1"));
    }
    let start = stride.max(lag);
    if series.len() <= start + 1 {
        return Err(FuzzyError::DegenerateSeries(format!(
            "stride {stride} with lag {lag} needs at least {} samples, got {}",
            start + 2,
            series.len()
        )));
    }
    let head = series.head();
    let rows = series.len() - start;
    let mut columns: [Vec<f64>; 5] = Default::default();
    for k in start..series.len() {
        columns[0].push(head[k - stride]);
        for j in 0..3 {
            columns[j + 1].push(series.rain(j)[k - lag]);
        }
        columns[4].push(head[k]);
    }

    let record = match normalization {
        Normalization::Dimensional => NormalizationRecord::Dimensional,
        Normalization::Fit => {
            NormalizationRecord::fit(&columns.iter().map(Vec::as_slice).collect::<Vec<_>>())?
        }
        Normalization::Apply(record) => record,
    };
    let mut out_of_range = 0;
    for (j, col) in columns.iter_mut().enumerate() {
        let (mapped, flagged) = record.apply_column(j, col);
        *col = mapped;
        out_of_range += flagged;
    }

    let mut inputs = DMatrix::zeros(rows, 4);
    for (j, col) in columns[..4].iter().enumerate() {
        inputs.column_mut(j).copy_from_slice(col);
    }
    let [_, _, _, _, targets] = columns;
    Ok(SupervisedSet {
        inputs,
        targets,
        stride,
        lag,
        normalization: record,
        out_of_range,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(seed: u64, n: usize) -> EventSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ch = || (0..n).map(|_| rng.random_range(0.0..3.0)).collect::<Vec<f64>>();
        let rain = [ch(), ch(), ch()];
        let head = ch().into_iter().map(|v| v * 40.0).collect();
        EventSeries::new(30.0, (0..n).map(|k| 30.0 * k as f64).collect(), rain, head).unwrap()
    }

    #[test]
    fn stride_one_row_count() {
        let s = random_series(1, 302);
        let set = build_supervised(&s, 0, 1, Normalization::Dimensional).unwrap();
        assert_eq!(set.rows(), 301);
        assert_eq!(set.inputs.ncols(), 4);
    }

    #[test]
    fn stride_ten_is_the_five_minute_scheme() {
        assert_eq!(scheme_seconds(10, 30.0), 300.0);
        assert_eq!(scheme_seconds(1, 30.0), 30.0);
        let s = random_series(2, 50);
        let set = build_supervised(&s, 3, 10, Normalization::Dimensional).unwrap();
        assert_eq!(set.rows(), 40);
        assert_eq!(set.inputs[(0, 0)], s.head()[0]);
        assert_eq!(set.targets[0], s.head()[10]);
    }

    #[test]
    fn rows_follow_index_arithmetic() {
        let s = random_series(3, 120);
        let lag = 4;
        let set = build_supervised(&s, lag, 1, Normalization::Dimensional).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let row = rng.random_range(0..set.rows());
            let k = row + lag;
            assert_eq!(set.inputs[(row, 0)], s.head()[k - 1]);
            for j in 0..3 {
                assert_eq!(set.inputs[(row, j + 1)], s.rain(j)[k - lag]);
            }
            assert_eq!(set.targets[row], s.head()[k]);
        }
    }

    #[test]
    fn insufficient_length_is_reported() {
        let s = random_series(4, 8);
        let err = build_supervised(&s, 0, 10, Normalization::Dimensional).unwrap_err();
        assert!(err.to_string().contains("needs at least 12 samples"), "{err}");
    }

    #[test]
    fn normalization_examples() {
        let rec = NormalizationRecord::fit(&[&[0.0, 5.0, 10.0]]).unwrap();
        assert_eq!(rec.apply_column(0, &[0.0, 5.0, 10.0]).0, vec![0.0, 0.5, 1.0]);
        assert!(NormalizationRecord::fit(&[&[2.0, 2.0]]).is_err());
        let (v, out) = rec.apply(0, 12.0);
        assert!((v - 1.2).abs() < 1e-15);
        assert!(out);
    }

    #[test]
    fn validation_reuses_training_statistics() {
        let train = random_series(5, 100);
        let valid = random_series(6, 100);
        let t = build_supervised(&train, 2, 1, Normalization::Fit).unwrap();
        let v = build_supervised(&valid, 2, 1, Normalization::Apply(t.normalization.clone())).unwrap();
        assert_eq!(v.normalization, t.normalization);
        assert!(t.inputs.iter().all(|x| (0.0..=1.0).contains(x)));
        assert_eq!(t.out_of_range, 0);
    }

    #[test]
    fn target_round_trip() {
        let s = random_series(7, 80);
        let raw = build_supervised(&s, 1, 2, Normalization::Dimensional).unwrap();
        let norm = build_supervised(&s, 1, 2, Normalization::Fit).unwrap();
        let (back, flagged) = norm.denormalize_targets(&norm.targets);
        assert_eq!(flagged, 0);
        for (a, b) in back.iter().zip(&raw.targets) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn min_max_is_monotone_and_invertible(values in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            prop_assume!(values.iter().any(|v| *v != values[0]));
            let rec = NormalizationRecord::fit(&[&values]).unwrap();
            let (mapped, _) = rec.apply_column(0, &values);
            for (i, a) in values.iter().enumerate() {
                for (j, b) in values.iter().enumerate() {
                    if a < b {
                        prop_assert!(mapped[i] <= mapped[j]);
                    }
                }
                let back = rec.invert(0, mapped[i]).0;
                prop_assert!((back - a).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }
}
