use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Output directory whose files are written atomically.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|source| CliError::Output {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes through a temporary sibling and renames it into place.
    pub fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.root.join(relative);
        let io = |source| CliError::Output {
            path: path.clone(),
            source,
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = path.with_extension("partial");
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(bytes).map_err(io)?;
        f.sync_all().map_err(io)?;
        fs::rename(&tmp, &path).map_err(io)?;
        self.written.push(relative.to_string());
        Ok(path)
    }

    /// Renders with `render` into memory, then writes atomically.
    pub fn write_with(
        &mut self,
        relative: &str,
        render: impl FnOnce(&mut Vec<u8>) -> fuzzy_runoff::Result<()>,
    ) -> Result<PathBuf, CliError> {
        let mut buf = Vec::new();
        render(&mut buf)?;
        self.write(relative, &buf)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.canonical().as_bytes());
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}

#[derive(Serialize)]
struct Versions {
    cli: &'static str,
    library: &'static str,
    model_format: u32,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_hash: String,
    lag: Option<usize>,
    versions: Versions,
    outputs: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Writes `manifest-<command>.toml`: the effective config, its hash, the
/// seed, versions and the files produced.
pub fn write_manifest(
    out: &mut OutputDir,
    command: &str,
    cfg: &ExperimentConfig,
    lag: Option<usize>,
) -> Result<PathBuf, CliError> {
    let manifest = Manifest {
        command,
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        lag,
        versions: Versions {
            cli: env!("CARGO_PKG_VERSION"),
            library: fuzzy_runoff::VERSION,
            model_format: fuzzy_runoff::model::MODEL_FORMAT_VERSION,
        },
        outputs: out.written().to_vec(),
        config: cfg,
    };
    let text = toml::to_string(&manifest).expect("manifests always serialize");
    out.write(&format!("manifest-{command}.toml"), text.as_bytes())
}
