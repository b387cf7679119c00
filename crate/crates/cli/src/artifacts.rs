//! Output directory handling and the files every run leaves behind.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use crate::config::ExperimentConfig;

pub const CONFIG_FILE: &str = "config.toml";
pub const VERSION_FILE: &str = "version.txt";
pub const SEED_FILE: &str = "seed.txt";
pub const METRICS_FILE: &str = "metrics.txt";
pub const FAILURE_FILE: &str = "failure.txt";

pub fn version_string() -> String {
    format!("flowfit {} ({})", env!("CARGO_PKG_VERSION"), env!("FLOWFIT_GIT_DESCRIBE"))
}

pub struct RunDir {
    pub path: PathBuf,
}

impl RunDir {
    /// Creates the output directory. An existing non-empty directory is
    /// cleared with `force` and refused otherwise.
    pub fn prepare(path: &Path, force: bool) -> Result<Self> {
        if path.exists() {
            if !path.is_dir() {
                bail!("output path {} exists and is not a directory", path.display());
            }
            let non_empty = fs::read_dir(path)?.next().is_some();
            if non_empty {
                if !force {
                    bail!("output directory {} is not empty; pass --force to overwrite it", path.display());
                }
                fs::remove_dir_all(path).with_context(|| format!("clearing {}", path.display()))?;
            }
        }
        fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Self { path: path.to_path_buf() })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
        let p = self.file(name);
        fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))
    }

    /// Resolved config, version and seed; written before any work starts.
    pub fn write_provenance(&self, config: &ExperimentConfig) -> Result<()> {
        self.write(CONFIG_FILE, config.to_toml()?)?;
        self.write(VERSION_FILE, version_string() + "\n")?;
        self.write(SEED_FILE, format!("{}\n", config.seed))
    }
}

/// `key=value` lines.
#[derive(Default)]
pub struct Metrics {
    lines: Vec<String>,
}

impl Metrics {
    pub fn put(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}={value}"));
    }

    /// Appends `key=value` text, prefixing every key.
    pub fn extend_prefixed(&mut self, prefix: &str, text: &str) {
        for line in text.lines().filter(|l| !l.is_empty()) {
            self.lines.push(format!("{prefix}{line}"));
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}
