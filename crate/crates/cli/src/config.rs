use std::path::{Path, PathBuf};

use fuzzy_runoff::clustering::{Algorithm, ClusterConfig, SubtractiveParams};
use fuzzy_runoff::dataio::StormParams;
use fuzzy_runoff::identify::{FitConfig, RuleCount};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Event files; both absent means the synthetic storms are used.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub validation: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Event length in seconds.
    pub duration: f64,
    pub storm: StormParams,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duration: 3.0 * 3600.0,
            storm: StormParams::default(),
        }
    }
}

/// `rules = 3` or `rules = "sweep"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RulesSetting {
    Count(usize),
    Mode(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalizationMode {
    Off,
    On,
    Both,
}

impl NormalizationMode {
    pub fn flags(self) -> Vec<bool> {
        match self {
            Self::Off => vec![false],
            Self::On => vec![true],
            Self::Both => vec![false, true],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Base sampling interval in seconds.
    pub interval: f64,
    pub algorithms: Vec<Algorithm>,
    pub rules: RulesSetting,
    /// Upper end of the rule-count sweep.
    pub max_rules: usize,
    pub fuzziness: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    pub regularization: f64,
    pub strides: Vec<usize>,
    pub normalization: NormalizationMode,
    /// Rainfall lag in samples; estimated from the training event when absent.
    pub lag: Option<usize>,
    pub max_lag: usize,
    pub subtractive: SubtractiveParams,
    pub data: DataConfig,
    pub synth: SynthConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let cluster = ClusterConfig::default();
        Self {
            seed: 0,
            interval: 30.0,
            algorithms: Algorithm::ALL.to_vec(),
            rules: RulesSetting::Count(3),
            max_rules: 8,
            fuzziness: cluster.fuzziness,
            tolerance: cluster.tolerance,
            max_iter: cluster.max_iter,
            regularization: cluster.regularization,
            strides: vec![1, 2, 5, 10],
            normalization: NormalizationMode::Both,
            lag: None,
            max_lag: 20,
            subtractive: cluster.subtractive,
            data: DataConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn field(name: &'static str, reason: impl Into<String>) -> CliError {
    CliError::Config {
        field: name,
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    /// Parses a config file; relative data paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| CliError::ConfigFile {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.train, &mut cfg.data.validation].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.interval > 0.0 && self.interval.is_finite()) {
            return Err(field("interval", "must be positive"));
        }
        if self.algorithms.is_empty() {
            return Err(field("algorithms", "at least one algorithm is required"));
        }
        if self.strides.is_empty() {
            return Err(field("strides", "at least one scheme is required"));
        }
        if self.strides.contains(&0) {
            return Err(field("strides", "strides must be at least 1"));
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return Err(field("algorithms", "duplicate algorithm"));
        }
        let mut strides = self.strides.clone();
        strides.sort_unstable();
        strides.dedup();
        if strides.len() != self.strides.len() {
            return Err(field("strides", "duplicate stride"));
        }
        self.rule_count()?;
        if self.max_rules < 2 {
            return Err(field("max_rules", "must be at least 2"));
        }
        if self.data.train.is_some() != self.data.validation.is_some() {
            return Err(field("data", "set both `train` and `validation`, or neither for synthetic storms"));
        }
        if !(self.synth.duration > 0.0 && self.synth.duration.is_finite()) {
            return Err(field("synth.duration", "must be positive"));
        }
        self.cluster_config()
            .validate()
            .map_err(CliError::Core)?;
        self.synth.storm.validate().map_err(CliError::Core)?;
        Ok(())
    }

    pub fn rule_count(&self) -> Result<RuleCount, CliError> {
        match &self.rules {
            RulesSetting::Count(c) if *c >= 2 => Ok(RuleCount::Fixed(*c)),
            RulesSetting::Count(_) => Err(field("rules", "must be at least 2")),
            RulesSetting::Mode(m) if m == "sweep" => Ok(RuleCount::Sweep { max: self.max_rules }),
            RulesSetting::Mode(m) => Err(field("rules", format!("expected a count or \"sweep\", got \"{m}\""))),
        }
    }

    pub fn cluster_config(&self) -> ClusterConfig {
        let clusters = match self.rules {
            RulesSetting::Count(c) => c,
            RulesSetting::Mode(_) => 2,
        };
        ClusterConfig {
            algorithm: self.algorithms.first().copied().unwrap_or(Algorithm::Gk),
            clusters,
            fuzziness: self.fuzziness,
            tolerance: self.tolerance,
            max_iter: self.max_iter,
            seed: self.seed,
            regularization: self.regularization,
            subtractive: self.subtractive,
        }
    }

    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        Ok(FitConfig {
            clustering: self.cluster_config(),
            rules: self.rule_count()?,
        })
    }

    /// Canonical text form, used for hashing and the manifest.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn parses_minimal_file() {
        let cfg: ExperimentConfig = toml::from_str(
            "seed = 4\nalgorithms = [\"GK\"]\nstrides = [10]\nnormalization = \"on\"\nrules = \"sweep\"\nmax_rules = 5\n",
        )
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.algorithms, [Algorithm::Gk]);
        assert_eq!(cfg.rule_count().unwrap(), RuleCount::Sweep { max: 5 });
        assert_eq!(cfg.normalization.flags(), [true]);
    }

    #[test]
    fn rejects_bad_fields_by_name() {
        let cfg = ExperimentConfig {
            strides: vec![],
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("strides"));
        let cfg = ExperimentConfig {
            rules: RulesSetting::Mode("auto".into()),
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("rules"));
        let cfg = ExperimentConfig {
            fuzziness: 1.0,
            ..Default::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("fuzziness"));
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }

    #[test]
    fn canonical_form_round_trips() {
        let cfg = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&cfg.canonical()).unwrap();
        assert_eq!(back, cfg);
    }
}
