//! Per-artifact manifests and cleanup of partial outputs.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{sha256_file, RunConfig, Seeds, SEED_SCHEME};
use crate::csvio::write_json;
use crate::error::Result;

/// Wall-clock seconds of the three method stages, file IO excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingReport {
    pub label_s: f64,
    pub train_s: f64,
    pub sample_s: f64,
    pub sample_count: usize,
    /// `sample_count / sample_s`
    pub samples_per_s: f64,
}

impl TimingReport {
    pub fn new(label_s: f64, train_s: f64, sample_s: f64, sample_count: usize) -> Self {
        let samples_per_s = if sample_s > 0.0 { sample_count as f64 / sample_s } else { f64::INFINITY };
        Self { label_s, train_s, sample_s, sample_count, samples_per_s }
    }
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(Self { path: path.to_path_buf(), sha256: sha256_file(path)? })
    }
}

/// Everything needed to re-run the stage that produced an artifact.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub argv: Vec<String>,
    pub config: &'a RunConfig,
    pub config_hash: String,
    pub seed_scheme: &'static str,
    pub seeds: Seeds,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<PathBuf>,
    /// Stage-specific values resolved at run time (steps, architecture, losses, timing).
    pub details: serde_json::Value,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            argv: std::env::args().collect(),
            config,
            config_hash: config.hash(),
            seed_scheme: SEED_SCHEME,
            seeds: config.seeds(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        self.inputs.push(FileDigest::of(path)?);
        Ok(self)
    }

    pub fn details(mut self, details: serde_json::Value) -> Self {
        self.details = details;
        self
    }

    pub fn write(mut self, outputs: &Outputs, path: &Path) -> Result<()> {
        self.outputs = outputs.paths.clone();
        write_json(path, &self)
    }
}

/// `samples.csv` -> `samples.csv.manifest.json`
pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Output files of one command; removed again unless the command commits.
#[derive(Debug, Default)]
pub struct Outputs {
    paths: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `path` before it is written.
    pub fn track(&mut self, path: impl Into<PathBuf>) -> PathBuf {
        let path = path.into();
        self.paths.push(path.clone());
        path
    }

    pub fn paths(&self) -> &[PathBuf] {
        &self.paths
    }

    pub fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for p in &self.paths {
            if p.exists() {
                if let Err(e) = std::fs::remove_file(p) {
                    log::warn!("could not remove partial output {}: {e}", p.display());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_outputs_are_removed() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.csv");
        {
            let mut out = Outputs::new();
            std::fs::write(out.track(&a), "x").unwrap();
            out.track(dir.path().join("never-written"));
        }
        assert!(!a.exists());
        {
            let mut out = Outputs::new();
            std::fs::write(out.track(&a), "x").unwrap();
            out.commit();
        }
        assert!(a.exists());
    }

    #[test]
    fn throughput() {
        let t = TimingReport::new(1.0, 2.0, 0.5, 1000);
        assert_eq!(t.samples_per_s, 2000.0);
    }
}
