use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fuzzy-runoff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    v.sort();
    v
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Three steady regimes: the joined rows form three separated groups.
fn regime_event(dir: &Path) -> PathBuf {
    let mut body = String::from("timestamp,rain1,rain2,rain3,head\n");
    let levels = [(0.5, 10.0), (2.5, 50.0), (4.5, 30.0)];
    for (s, (rain, head)) in levels.iter().enumerate() {
        for i in 0..80 {
            let k = s * 80 + i;
            let w = (k as f64 * 1.7).sin() * 0.2;
            let v = (k as f64 * 2.3).cos() * 0.2;
            body.push_str(&format!(
                "{},{},{},{},{}\n",
                30 * k,
                rain + w,
                rain * 0.8 - v,
                rain * 1.2 + w,
                head + 20.0 * v
            ));
        }
    }
    let p = dir.join("regimes.csv");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for (out, seed) in [(&a, "5"), (&b, "5"), (&c, "6")] {
        assert!(run(&["synth", "--seed", seed, "--out", path(out)]).status.success());
    }
    for f in ["train.csv", "validation.csv", "manifest-synth.toml"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_ne!(fs::read(a.join("train.csv")).unwrap(), fs::read(c.join("train.csv")).unwrap());
}

#[test]
fn single_combination_writes_one_model() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "one.toml",
        "algorithms = [\"GK\"]\nstrides = [10]\nnormalization = \"off\"\nlag = 6\n",
    );
    let out = dir.path().join("out");
    let o = run(&["train", "--config", path(&cfg), "--out", path(&out), "--seed", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(files(&out.join("models")), ["gk_5min_dim.toml"]);
    assert_eq!(files(&out.join("traces")), ["gk_5min_dim.csv"]);
    let trace = fs::read_to_string(out.join("traces/gk_5min_dim.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective,delta_u,converged\n"));
}

#[test]
fn full_grid_writes_24_models_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "grid.toml", "lag = 6\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&["train", "--config", path(&cfg), "--out", path(out), "--seed", "11"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let models = files(&a.join("models"));
    assert_eq!(models.len(), 24);
    for m in &models {
        assert_eq!(
            fs::read(a.join("models").join(m)).unwrap(),
            fs::read(b.join("models").join(m)).unwrap(),
            "{m}"
        );
    }
    assert_eq!(
        fs::read(a.join("manifest-train.toml")).unwrap(),
        fs::read(b.join("manifest-train.toml")).unwrap()
    );

    let o = run(&["evaluate", "--config", path(&cfg), "--out", path(&a), "--seed", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(a.join("forecast_report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("algorithm,scheme,split,RMSE,VE,CE,R"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 24);
    assert!(rows.iter().any(|r| r.starts_with("GK (N),")));
    assert!(rows.iter().any(|r| r.starts_with("GK,")));
    assert_eq!(files(&a.join("predictions")).len(), 24);
}

#[test]
fn manifest_records_hash_seed_and_versions() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert!(run(&["synth", "--seed", "9", "--out", path(&out)]).status.success());
    let text = fs::read_to_string(out.join("manifest-synth.toml")).unwrap();
    let doc: toml::Table = text.parse().unwrap();
    assert_eq!(doc["seed"].as_integer(), Some(9));
    assert!(doc["config_hash"].as_str().unwrap().starts_with("sha256:"));
    assert!(doc["versions"]["library"].is_str());
    assert_eq!(doc["config"]["seed"].as_integer(), Some(9));
}

#[test]
fn linear_reservoir_is_forecast_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "linear.toml",
        "algorithms = [\"GK\", \"FCM\"]\nstrides = [1]\nnormalization = \"both\"\nlag = 6\n\
         [synth.storm]\nexponent = 1.0\nrouting_lag = 6\n",
    );
    let out = dir.path().join("out");
    for cmd in ["train", "evaluate"] {
        let o = run(&[cmd, "--config", path(&cfg), "--out", path(&out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let report = fs::read_to_string(out.join("forecast_report.csv")).unwrap();
    for row in report.lines().skip(1) {
        let f: Vec<&str> = row.split(',').collect();
        let rmse: f64 = f[3].parse().unwrap();
        let ce: f64 = f[5].parse().unwrap();
        assert!(rmse < 1e-6, "{row}");
        assert!((ce - 1.0).abs() < 1e-9, "{row}");
    }
}

#[test]
fn compare_ranks_and_breaks_ties_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.csv");
    fs::write(
        &report,
        "algorithm,scheme,split,RMSE,VE,CE,R\n\
         SC,30s,validation,2.0,0,0.9,0.9\n\
         GK,30s,validation,1.0,0,0.99,0.99\n\
         FCM,30s,validation,2.0,0,0.9,0.9\n\
         GK,5min,validation,3.0,0,0.9,0.9\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&["compare", "--out", path(&out), path(&report)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = fs::read_to_string(out.join("ranking.md")).unwrap();
    let gk = md.find("| 1 | GK |").unwrap();
    let fcm = md.find("| 2 | FCM |").unwrap();
    let sc = md.find("| 3 | SC |").unwrap();
    assert!(gk < fcm && fcm < sc);
    assert!(md.contains("## 5min"));

    let o = run(&["compare", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_recovers_three_regimes() {
    let dir = tempfile::tempdir().unwrap();
    let data = regime_event(dir.path());
    let cfg = write_config(
        dir.path(),
        "sweep.toml",
        &format!(
            "algorithms = [\"FCM\"]\nstrides = [1]\nnormalization = \"off\"\nlag = 0\nmax_rules = 5\n\
             [data]\ntrain = {0:?}\nvalidation = {0:?}\n",
            path(&data)
        ),
    );
    let out = dir.path().join("out");
    let o = run(&["sweep", "--config", path(&cfg), "--out", path(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = fs::read_to_string(out.join("sweep/summary.csv")).unwrap();
    for line in summary.lines().skip(1) {
        assert_eq!(line.split(',').nth(3), Some("3"), "{line}");
    }
    let again = dir.path().join("again");
    assert!(run(&["sweep", "--config", path(&cfg), "--out", path(&again)]).status.success());
    for f in files(&out.join("sweep")) {
        assert_eq!(
            fs::read(out.join("sweep").join(&f)).unwrap(),
            fs::read(again.join("sweep").join(&f)).unwrap()
        );
    }
}

#[test]
fn sweep_refuses_c_max_at_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let data = regime_event(dir.path());
    let cfg = write_config(
        dir.path(),
        "big.toml",
        &format!(
            "algorithms = [\"GK\"]\nstrides = [1]\nnormalization = \"off\"\nlag = 0\nmax_rules = 239\n\
             [data]\ntrain = {0:?}\nvalidation = {0:?}\n",
            path(&data)
        ),
    );
    let o = run(&["sweep", "--config", path(&cfg), "--out", path(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("max_rules"), "{}", stderr(&o));
}

#[test]
fn exit_codes_distinguish_config_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");

    let bad = write_config(dir.path(), "bad.toml", "strides = []\n");
    let o = run(&["train", "--config", path(&bad), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("strides"));

    let unknown = write_config(dir.path(), "unknown.toml", "colour = \"red\"\n");
    assert_eq!(run(&["train", "--config", path(&unknown), "--out", path(&out)]).status.code(), Some(2));

    let gap = dir.path().join("gap.csv");
    fs::write(&gap, "timestamp,rain1,rain2,rain3,head\n0,0,,0,1\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "data.toml",
        &format!("[data]\ntrain = {0:?}\nvalidation = {0:?}\n", path(&gap)),
    );
    let o = run(&["train", "--config", path(&cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing value in column rain2"), "{}", stderr(&o));
}

#[test]
fn evaluate_rejects_scheme_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let train_cfg = write_config(
        dir.path(),
        "t.toml",
        "algorithms = [\"FCM\"]\nstrides = [2]\nnormalization = \"on\"\nlag = 6\n",
    );
    let eval_cfg = write_config(
        dir.path(),
        "e.toml",
        "algorithms = [\"FCM\"]\nstrides = [10]\nnormalization = \"on\"\nlag = 6\n",
    );
    let out = dir.path().join("o");
    assert!(run(&["train", "--config", path(&train_cfg), "--out", path(&out)]).status.success());
    let o = run(&["evaluate", "--config", path(&eval_cfg), "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("stride 2"), "{}", stderr(&o));
}
