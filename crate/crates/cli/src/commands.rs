use std::fs;
use std::path::{Path, PathBuf};

use fuzzy_runoff::clustering::{run_sc, Algorithm, SubtractiveParams};
use fuzzy_runoff::dataio::{
    build_supervised, estimate_lag, load_event_csv, synth_storm, EventSeries, Normalization,
};
use fuzzy_runoff::experiment::{
    apply_forecast, scheme_label, train_grid, ForecastGrid, ForecastReport, ForecastRow, ForecastSpec,
    TrainedForecast,
};
use fuzzy_runoff::sweep_clusters;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{write_manifest, OutputDir};

pub struct Events {
    pub train: EventSeries,
    pub validation: EventSeries,
}

/// Loads the configured events, or generates the synthetic pair from the
/// seed (`seed` trains, `seed + 1` validates).
pub fn load_events(cfg: &ExperimentConfig) -> Result<Events, CliError> {
    match (&cfg.data.train, &cfg.data.validation) {
        (Some(t), Some(v)) => Ok(Events {
            train: load_event_csv(t, cfg.interval)?,
            validation: load_event_csv(v, cfg.interval)?,
        }),
        _ => Ok(Events {
            train: synth_storm(cfg.seed, cfg.synth.duration, cfg.interval, &cfg.synth.storm)?,
            validation: synth_storm(
                cfg.seed.wrapping_add(1),
                cfg.synth.duration,
                cfg.interval,
                &cfg.synth.storm,
            )?,
        }),
    }
}

fn resolve_lag(cfg: &ExperimentConfig, train: &EventSeries) -> Result<usize, CliError> {
    match cfg.lag {
        Some(l) => Ok(l),
        None => Ok(estimate_lag(train, cfg.max_lag)?.shared),
    }
}

fn grid(cfg: &ExperimentConfig, lag: usize) -> ForecastGrid {
    ForecastGrid {
        algorithms: cfg.algorithms.clone(),
        strides: cfg.strides.clone(),
        normalizations: cfg.normalization.flags(),
        lag,
    }
}

pub fn cmd_synth(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let events = load_events(&ExperimentConfig {
        data: Default::default(),
        ..cfg.clone()
    })?;
    out.write_with("train.csv", |b| events.train.write_csv(b))?;
    out.write_with("validation.csv", |b| events.validation.write_csv(b))?;
    write_manifest(out, "synth", cfg, None)?;
    Ok(())
}

pub fn cmd_sweep(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let events = load_events(cfg)?;
    let lag = resolve_lag(cfg, &events.train)?;
    let template = cfg.cluster_config();
    let mut summary = csv::Writer::from_writer(Vec::new());
    summary
        .write_record(["algorithm", "scheme", "normalized", "consensus", "failed_C"])
        .map_err(fuzzy_runoff::FuzzyError::from)?;
    for spec in grid(cfg, lag).specs() {
        let stem = spec.file_stem(cfg.interval);
        let mode = if spec.normalized {
            Normalization::Fit
        } else {
            Normalization::Dimensional
        };
        let set = build_supervised(&events.train, lag, spec.stride, mode)?;
        let data = set.joined()?;
        if cfg.max_rules >= data.samples() {
            return Err(CliError::Config {
                field: "max_rules",
                reason: format!(
                    "C_max = {} must be below the {} training rows of {stem}",
                    cfg.max_rules,
                    data.samples()
                ),
            });
        }
        let swept = sweep_clusters(&data, &template, 2..=cfg.max_rules, spec.algorithm);
        let (consensus, failed) = match swept {
            Ok(report) => {
                out.write_with(&format!("sweep/{stem}_indices.csv"), |b| report.write_csv(b))?;
                out.write_with(&format!("sweep/{stem}_optima.csv"), |b| report.write_optima_csv(b))?;
                let failed: Vec<String> = report.failures.iter().map(|(c, _)| c.to_string()).collect();
                (report.consensus, failed)
            }
            // too few density peaks for any C in range: report the count the
            // search finds on its own
            Err(_) if spec.algorithm == Algorithm::Sc => {
                let params = SubtractiveParams {
                    max_centers: None,
                    ..cfg.subtractive
                };
                let found = run_sc(&data, &params).map_err(|e| e.labeled(stem.clone()))?;
                let failed = (2..=cfg.max_rules).map(|c| c.to_string()).collect();
                (found.effective_clusters(), failed)
            }
            Err(e) => return Err(e.labeled(stem).into()),
        };
        summary
            .write_record([
                spec.algorithm.label(),
                &scheme_label(spec.stride, cfg.interval),
                &spec.normalized.to_string(),
                &consensus.to_string(),
                &failed.join(" "),
            ])
            .map_err(fuzzy_runoff::FuzzyError::from)?;
        println!("{stem}: consensus C = {consensus}");
    }
    let bytes = summary
        .into_inner()
        .map_err(|e| fuzzy_runoff::FuzzyError::Io(e.into_error()))?;
    out.write("sweep/summary.csv", &bytes)?;
    write_manifest(out, "sweep", cfg, Some(lag))?;
    Ok(())
}

pub fn cmd_train(cfg: &ExperimentConfig, out: &mut OutputDir) -> Result<(), CliError> {
    let events = load_events(cfg)?;
    let lag = resolve_lag(cfg, &events.train)?;
    let models = train_grid(&events.train, &grid(cfg, lag), &cfg.fit_config()?)?;
    let mut report = ForecastReport::default();
    for m in &models {
        let stem = m.spec.file_stem(cfg.interval);
        out.write(&format!("models/{stem}.toml"), m.to_text().as_bytes())?;
        out.write_with(&format!("fits/{stem}.csv"), |b| m.fit.write_csv(b))?;
        out.write_with(&format!("traces/{stem}.csv"), |b| m.fit.trace.write_csv(b))?;
        if let Some(sweep) = &m.fit.sweep {
            out.write_with(&format!("sweep/{stem}_indices.csv"), |b| sweep.write_csv(b))?;
        }
        let fitted = apply_forecast(&events.train, &m.spec, &m.normalization, &m.model)
            .map_err(|e| e.labeled(stem.clone()))?;
        report.rows.push(ForecastRow::new(
            m.spec.label(),
            scheme_label(m.spec.stride, cfg.interval),
            "train",
            &fitted.metrics,
        ));
        println!("{stem}: {} rules, training RMSE {:.4}", m.fit.rules, m.fit.training.rmse);
    }
    out.write_with("train_report.csv", |b| report.write_csv(b))?;
    write_manifest(out, "train", cfg, Some(lag))?;
    Ok(())
}

fn model_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Input {
        path: dir.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input {
            path: dir.to_path_buf(),
            reason: "no model files found".into(),
        });
    }
    Ok(files)
}

pub fn cmd_evaluate(cfg: &ExperimentConfig, models: &Path, out: &mut OutputDir) -> Result<(), CliError> {
    let events = load_events(cfg)?;
    let mut loaded = Vec::new();
    for path in model_files(models)? {
        let text = fs::read_to_string(&path).map_err(|e| CliError::Input {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let (spec, interval, normalization, model) =
            TrainedForecast::from_text(&text).map_err(|e| e.labeled(path.display().to_string()))?;
        check_scheme(cfg, &spec, interval, &path)?;
        loaded.push((spec, interval, normalization, model));
    }
    // grid order: algorithm, then horizon, then normalization
    loaded.sort_by_key(|(spec, ..)| (spec.algorithm, spec.stride, spec.normalized));
    let mut report = ForecastReport::default();
    for (spec, interval, normalization, model) in loaded {
        let stem = spec.file_stem(interval);
        let outcome = apply_forecast(&events.validation, &spec, &normalization, &model)
            .map_err(|e| e.labeled(stem.clone()))?;
        report.rows.push(ForecastRow::new(
            spec.label(),
            scheme_label(spec.stride, interval),
            "validation",
            &outcome.metrics,
        ));
        let offset = spec.stride.max(spec.lag);
        out.write_with(&format!("predictions/{stem}.csv"), |b| {
            let mut w = csv::Writer::from_writer(b);
            w.write_record(["timestamp", "observed", "predicted"])?;
            for (i, (o, p)) in outcome.observed.iter().zip(&outcome.predicted).enumerate() {
                let t = events.validation.timestamps()[offset + i];
                w.write_record([t.to_string(), o.to_string(), p.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })?;
        if outcome.out_of_range > 0 {
            eprintln!("{stem}: {} validation values outside the training range", outcome.out_of_range);
        }
        println!("{stem}: validation RMSE {:.4}", outcome.metrics.rmse);
    }
    out.write_with("forecast_report.csv", |b| report.write_csv(b))?;
    write_manifest(out, "evaluate", cfg, None)?;
    Ok(())
}

fn check_scheme(cfg: &ExperimentConfig, spec: &ForecastSpec, interval: f64, path: &Path) -> Result<(), CliError> {
    let mismatch = |reason: String| CliError::Config {
        field: "strides",
        reason: format!("{}: {reason}", path.display()),
    };
    if interval != cfg.interval {
        return Err(mismatch(format!(
            "model interval {interval} s differs from configured {} s",
            cfg.interval
        )));
    }
    if !cfg.strides.contains(&spec.stride) {
        return Err(mismatch(format!(
            "model stride {} is not among the configured strides {:?}",
            spec.stride, cfg.strides
        )));
    }
    Ok(())
}

pub fn cmd_compare(cfg: &ExperimentConfig, reports: &[PathBuf], out: &mut OutputDir) -> Result<(), CliError> {
    if reports.is_empty() {
        return Err(CliError::Config {
            field: "reports",
            reason: "at least one report is required".into(),
        });
    }
    let mut merged = ForecastReport::default();
    for path in reports {
        let file = fs::File::open(path).map_err(|e| CliError::Input {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        let r = ForecastReport::read_csv(file).map_err(|e| CliError::Input {
            path: path.clone(),
            reason: e.to_string(),
        })?;
        merged.extend(r);
    }
    if merged.ranking().is_empty() {
        return Err(CliError::Input {
            path: reports[0].clone(),
            reason: "no validation rows to rank".into(),
        });
    }
    let md = merged.ranking_markdown();
    out.write("ranking.md", md.as_bytes())?;
    print!("{md}");
    write_manifest(out, "compare", cfg, None)?;
    Ok(())
}
