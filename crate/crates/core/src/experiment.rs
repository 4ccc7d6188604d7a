//! Forecast experiments: train one model per (algorithm, scheme,
//! normalization) on a training event and score it on any other event.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::Algorithm;
use crate::dataio::{build_supervised, EventSeries, Normalization, NormalizationRecord};
use crate::error::{FuzzyError, Result};
use crate::identify::{fit_model, FitConfig, FitReport};
use crate::metrics::MetricSet;
use crate::model::{ModelDocument, TsModel};

/// One cell of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForecastSpec {
    pub algorithm: Algorithm,
    /// Prediction stride in samples.
    pub stride: usize,
    /// Rainfall-to-head lag in samples.
    pub lag: usize,
    pub normalized: bool,
}

impl ForecastSpec {
    /// Report label: `GK` or `GK (N)`.
    pub fn label(&self) -> String {
        if self.normalized {
            format!("{} (N)", self.algorithm)
        } else {
            self.algorithm.to_string()
        }
    }

    /// File stem encoding the combination, e.g. `gk_5min_norm`.
    pub fn file_stem(&self, interval: f64) -> String {
        format!(
            "{}_{}_{}",
            self.algorithm.label().to_ascii_lowercase(),
            scheme_label(self.stride, interval),
            if self.normalized { "norm" } else { "dim" }
        )
    }
}

/// Horizon label such as `30s` or `5min`.
pub fn scheme_label(stride: usize, interval: f64) -> String {
    let secs = stride as f64 * interval;
    if secs >= 60.0 && secs % 60.0 == 0.0 {
        format!("{}min", secs / 60.0)
    } else {
        format!("{secs}s")
    }
}

/// A fitted forecast model together with everything needed to apply it.
#[derive(Debug, Clone)]
pub struct TrainedForecast {
    pub spec: ForecastSpec,
    pub interval: f64,
    pub normalization: NormalizationRecord,
    pub model: TsModel,
    pub fit: FitReport,
}

#[derive(Serialize, Deserialize)]
struct ForecastDocument {
    spec: ForecastSpec,
    interval: f64,
    normalization: NormalizationRecord,
    model: ModelDocument,
}

impl TrainedForecast {
    pub fn to_text(&self) -> String {
        let doc = ForecastDocument {
            spec: self.spec,
            interval: self.interval,
            normalization: self.normalization.clone(),
            model: self.model.to_document(),
        };
        toml::to_string(&doc).expect("forecast documents always serialize")
    }

    /// Restores the model and its scaling. The fit report is not stored, so
    /// the returned value only carries what prediction needs.
    pub fn from_text(text: &str) -> Result<(ForecastSpec, f64, NormalizationRecord, TsModel)> {
        let doc: ForecastDocument =
            toml::from_str(text).map_err(|e| FuzzyError::Format(e.to_string()))?;
        let model = TsModel::from_document(&doc.model)?;
        Ok((doc.spec, doc.interval, doc.normalization, model))
    }
}

/// Predictions of a forecast model on one event, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastOutcome {
    pub observed: Vec<f64>,
    pub predicted: Vec<f64>,
    pub metrics: MetricSet,
    pub degenerate_rows: usize,
    /// Inputs outside the training range.
    pub out_of_range: usize,
}

pub fn train_forecast(series: &EventSeries, spec: ForecastSpec, fit: &FitConfig) -> Result<TrainedForecast> {
    let mode = if spec.normalized {
        Normalization::Fit
    } else {
        Normalization::Dimensional
    };
    let set = build_supervised(series, spec.lag, spec.stride, mode)?;
    let data = set.joined()?;
    let cfg = FitConfig {
        clustering: fit.clustering.clone().with_algorithm(spec.algorithm),
        rules: fit.rules,
    };
    let (model, report) = fit_model(&data, &cfg)?;
    Ok(TrainedForecast {
        spec,
        interval: series.interval(),
        normalization: set.normalization,
        model,
        fit: report,
    })
}

/// Applies a model to an event; normalized predictions are mapped back to
/// physical units before scoring.
pub fn apply_forecast(
    series: &EventSeries,
    spec: &ForecastSpec,
    normalization: &NormalizationRecord,
    model: &TsModel,
) -> Result<ForecastOutcome> {
    let raw = build_supervised(series, spec.lag, spec.stride, Normalization::Dimensional)?;
    let scaled = build_supervised(
        series,
        spec.lag,
        spec.stride,
        Normalization::Apply(normalization.clone()),
    )?;
    let batch = model
        .predict_batch(&scaled.inputs)
        .map_err(|e| e.in_stage("forecast"))?;
    let (predicted, _) = scaled.denormalize_targets(&batch.values);
    let metrics = MetricSet::evaluate(&raw.targets, &predicted)?;
    Ok(ForecastOutcome {
        observed: raw.targets,
        predicted,
        metrics,
        degenerate_rows: batch.degenerate_rows.len(),
        out_of_range: scaled.out_of_range,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRow {
    pub algorithm: String,
    pub scheme: String,
    pub split: String,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
    #[serde(rename = "VE")]
    pub ve: f64,
    #[serde(rename = "CE")]
    pub ce: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

impl ForecastRow {
    pub fn new(label: String, scheme: String, split: &str, m: &MetricSet) -> Self {
        Self {
            algorithm: label,
            scheme,
            split: split.to_string(),
            rmse: m.rmse,
            ve: m.ve,
            ce: m.ce,
            r: m.r,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastReport {
    pub rows: Vec<ForecastRow>,
}

impl ForecastReport {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        if self.rows.is_empty() {
            w.write_record(["algorithm", "scheme", "split", "RMSE", "VE", "CE", "R"])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let rows = r.deserialize().collect::<std::result::Result<Vec<ForecastRow>, _>>()?;
        Ok(Self { rows })
    }

    pub fn extend(&mut self, other: ForecastReport) {
        self.rows.extend(other.rows);
    }

    /// Validation rows per scheme, sorted by RMSE then by algorithm label.
    /// Schemes keep their first-seen order.
    pub fn ranking(&self) -> Vec<(String, Vec<ForecastRow>)> {
        let mut out: Vec<(String, Vec<ForecastRow>)> = Vec::new();
        for row in self.rows.iter().filter(|r| r.split == "validation") {
            match out.iter_mut().find(|(s, _)| *s == row.scheme) {
                Some((_, rows)) => rows.push(row.clone()),
                None => out.push((row.scheme.clone(), vec![row.clone()])),
            }
        }
        for (_, rows) in &mut out {
            rows.sort_by(|a, b| {
                rmse_order(a.rmse, b.rmse).then_with(|| a.algorithm.cmp(&b.algorithm))
            });
        }
        out
    }

    /// Markdown summary of [`ForecastReport::ranking`]; `delta` is the RMSE
    /// gap to the best entry of the scheme.
    pub fn ranking_markdown(&self) -> String {
        let mut md = String::from("# Validation ranking\n");
        for (scheme, rows) in self.ranking() {
            let _ = write!(
                md,
                "\n## {scheme}\n\n| rank | algorithm | RMSE | delta | CE | VE | R |\n|---:|---|---:|---:|---:|---:|---:|\n"
            );
            let best = rows[0].rmse;
            for (i, r) in rows.iter().enumerate() {
                let _ = writeln!(
                    md,
                    "| {} | {} | {:.4} | +{:.4} | {:.4} | {:.4} | {:.4} |",
                    i + 1,
                    r.algorithm,
                    r.rmse,
                    r.rmse - best,
                    r.ce,
                    r.ve,
                    r.r
                );
            }
        }
        md
    }
}

/// Cartesian experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastGrid {
    pub algorithms: Vec<Algorithm>,
    pub strides: Vec<usize>,
    pub normalizations: Vec<bool>,
    pub lag: usize,
}

impl ForecastGrid {
    pub fn specs(&self) -> Vec<ForecastSpec> {
        let mut out = Vec::new();
        for &algorithm in &self.algorithms {
            for &stride in &self.strides {
                for &normalized in &self.normalizations {
                    out.push(ForecastSpec {
                        algorithm,
                        stride,
                        lag: self.lag,
                        normalized,
                    });
                }
            }
        }
        out
    }
}

/// Trains every grid cell in parallel. Output order follows the grid and
/// errors carry the cell label.
pub fn train_grid(train: &EventSeries, grid: &ForecastGrid, fit: &FitConfig) -> Result<Vec<TrainedForecast>> {
    grid.specs()
        .into_par_iter()
        .map(|spec| {
            train_forecast(train, spec, fit)
                .map_err(|e| e.labeled(spec.file_stem(train.interval())))
        })
        .collect()
}

/// Trains every grid cell on `train` and scores it on `train` and
/// `validation`. Output order follows the grid.
pub fn run_grid(
    train: &EventSeries,
    validation: &EventSeries,
    grid: &ForecastGrid,
    fit: &FitConfig,
) -> Result<(Vec<TrainedForecast>, ForecastReport)> {
    if train.interval() != validation.interval() {
        return Err(FuzzyError::invalid(
            "interval",
            "training and validation events use different sampling intervals",
        ));
    }
    let models = train_grid(train, grid, fit)?;
    let mut report = ForecastReport::default();
    for m in &models {
        let spec = m.spec;
        let scheme = scheme_label(spec.stride, train.interval());
        for (series, split) in [(train, "train"), (validation, "validation")] {
            let out = apply_forecast(series, &spec, &m.normalization, &m.model)
                .map_err(|e| e.labeled(format!("{} {split}", spec.file_stem(train.interval()))))?;
            report.rows.push(ForecastRow::new(spec.label(), scheme.clone(), split, &out.metrics));
        }
    }
    Ok((models, report))
}

/// Ordering helper for RMSE values where NaN ranks last.
pub fn rmse_order(a: f64, b: f64) -> Ordering {
    a.partial_cmp(&b)
        .unwrap_or_else(|| a.is_nan().cmp(&b.is_nan()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::ClusterConfig;
    use crate::dataio::{synth_storm, StormParams};
    use crate::identify::RuleCount;

    fn storms() -> (EventSeries, EventSeries) {
        let p = StormParams::default();
        (
            synth_storm(1, 9000.0, 30.0, &p).unwrap(),
            synth_storm(2, 9000.0, 30.0, &p).unwrap(),
        )
    }

    fn fit_cfg() -> FitConfig {
        FitConfig {
            clustering: ClusterConfig::default().with_seed(3),
            rules: RuleCount::Fixed(3),
        }
    }

    #[test]
    fn labels_and_stems() {
        let spec = ForecastSpec {
            algorithm: Algorithm::Gk,
            stride: 10,
            lag: 6,
            normalized: true,
        };
        assert_eq!(spec.label(), "GK (N)");
        assert_eq!(spec.file_stem(30.0), "gk_5min_norm");
        assert_eq!(scheme_label(1, 30.0), "30s");
        assert_eq!(scheme_label(5, 30.0), "150s");
    }

    #[test]
    fn grid_is_cartesian() {
        let grid = ForecastGrid {
            algorithms: Algorithm::ALL.to_vec(),
            strides: vec![1, 2, 5, 10],
            normalizations: vec![false, true],
            lag: 6,
        };
        let specs = grid.specs();
        assert_eq!(specs.len(), 24);
        let mut stems: Vec<String> = specs.iter().map(|s| s.file_stem(30.0)).collect();
        stems.sort();
        stems.dedup();
        assert_eq!(stems.len(), 24);
    }

    #[test]
    fn normalized_predictions_are_in_physical_units() {
        let (train, valid) = storms();
        let spec = ForecastSpec {
            algorithm: Algorithm::Gk,
            stride: 1,
            lag: 6,
            normalized: true,
        };
        let trained = train_forecast(&train, spec, &fit_cfg()).unwrap();
        let out = apply_forecast(&valid, &spec, &trained.normalization, &trained.model).unwrap();
        let peak = out.observed.iter().cloned().fold(f64::MIN, f64::max);
        let pred_peak = out.predicted.iter().cloned().fold(f64::MIN, f64::max);
        assert!(pred_peak > 0.5 * peak, "{pred_peak} vs {peak}");
        assert!(out.metrics.rmse < 0.1 * peak);
    }

    #[test]
    fn forecast_document_round_trip() {
        let (train, valid) = storms();
        let spec = ForecastSpec {
            algorithm: Algorithm::Fcm,
            stride: 2,
            lag: 6,
            normalized: true,
        };
        let trained = train_forecast(&train, spec, &fit_cfg()).unwrap();
        let (s, interval, norm, model) = TrainedForecast::from_text(&trained.to_text()).unwrap();
        assert_eq!(s, spec);
        assert_eq!(interval, 30.0);
        let a = apply_forecast(&valid, &spec, &trained.normalization, &trained.model).unwrap();
        let b = apply_forecast(&valid, &s, &norm, &model).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ranking_breaks_ties_by_name() {
        let m = |rmse| MetricSet { rmse, ve: 0.0, ce: 0.0, r: 0.0 };
        let report = ForecastReport {
            rows: vec![
                ForecastRow::new("SC".into(), "30s".into(), "validation", &m(1.0)),
                ForecastRow::new("GK".into(), "30s".into(), "validation", &m(1.0)),
                ForecastRow::new("FCM".into(), "30s".into(), "validation", &m(0.5)),
                ForecastRow::new("FCM".into(), "30s".into(), "train", &m(0.1)),
                ForecastRow::new("GK".into(), "5min".into(), "validation", &m(f64::NAN)),
                ForecastRow::new("SC".into(), "5min".into(), "validation", &m(2.0)),
            ],
        };
        let ranking = report.ranking();
        let names: Vec<&str> = ranking[0].1.iter().map(|r| r.algorithm.as_str()).collect();
        assert_eq!(names, ["FCM", "GK", "SC"]);
        assert_eq!(ranking[1].1[0].algorithm, "SC");
        let md = report.ranking_markdown();
        assert!(md.contains("## 30s") && md.contains("| 1 | FCM |"));
    }

    #[test]
    fn report_csv_round_trip() {
        let m = MetricSet { rmse: 1.25, ve: -0.5, ce: f64::NAN, r: 0.9 };
        let report = ForecastReport {
            rows: vec![ForecastRow::new("GK (N)".into(), "30s".into(), "train", &m)],
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("algorithm,scheme,split,RMSE,VE,CE,R\n"));
        let back = ForecastReport::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows[0].algorithm, "GK (N)");
        assert!(back.rows[0].ce.is_nan());
        assert_eq!(back.rows[0].rmse, 1.25);
    }
}
