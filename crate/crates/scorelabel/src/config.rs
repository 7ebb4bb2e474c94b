//! Run configuration: defaults, JSON config files, seed derivation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use scorelabel_core::data::ToyDataset;
use scorelabel_core::integrate::{IntegrationConfig, Mode};
use scorelabel_core::labeler::LabelSeeds;
use scorelabel_core::metrics::{DEFAULT_BINS, DEFAULT_SMOOTHING};
use scorelabel_core::schedule::{Schedule, DEFAULT_TIME_EPS};
use scorelabel_core::{Activation, ScoreConfig, TrainConfig};

use crate::csvio::read_json;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub toy: ToyDataset,
    /// Tabular data; takes precedence over `toy` when set.
    pub csv: Option<PathBuf>,
    /// `None` detects a header row.
    pub has_header: Option<bool>,
    /// Number of toy samples.
    pub j: usize,
    /// Defaults to on for CSV data and off for toys.
    pub standardize: Option<bool>,
    /// Drop discrete and highly correlated columns. Same default as `standardize`.
    pub prune: Option<bool>,
    pub corr_threshold: f64,
    pub discrete_max_distinct: usize,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            toy: ToyDataset::EightGaussians,
            csv: None,
            has_header: None,
            j: 1000,
            standardize: None,
            prune: None,
            corr_threshold: 0.98,
            discrete_max_distinct: 10,
        }
    }
}

impl DatasetSpec {
    pub fn id(&self) -> String {
        match &self.csv {
            Some(p) => p.display().to_string(),
            None => self.toy.name().to_string(),
        }
    }

    pub fn standardize(&self) -> bool {
        self.standardize.unwrap_or(self.csv.is_some())
    }

    pub fn prune(&self) -> bool {
        self.prune.unwrap_or(self.csv.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabelSpec {
    pub m: usize,
    /// `None` means 100 steps for 2-D data and 500 otherwise.
    pub steps: Option<usize>,
    pub time_eps: f64,
    /// `None` means `min(J, 5000)`.
    pub batch_size: Option<usize>,
    pub resample_per_step: bool,
    pub shared_batches: bool,
    pub replacement: bool,
    pub mode: Mode,
}

impl Default for LabelSpec {
    fn default() -> Self {
        Self {
            m: 1000,
            steps: None,
            time_eps: DEFAULT_TIME_EPS,
            batch_size: None,
            resample_per_step: true,
            shared_batches: true,
            replacement: false,
            mode: Mode::Ode,
        }
    }
}

impl LabelSpec {
    pub fn steps_for(&self, dims: usize) -> usize {
        self.steps.unwrap_or(if dims == 2 { 100 } else { 500 })
    }

    pub fn integration(&self, dims: usize) -> Result<IntegrationConfig> {
        let schedule = Schedule::new(self.time_eps)?;
        let cfg = IntegrationConfig::new(self.steps_for(dims), schedule).with_mode(self.mode);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn score(&self) -> ScoreConfig {
        ScoreConfig {
            batch_size: self.batch_size,
            resample_per_step: self.resample_per_step,
            shared_batches: self.shared_batches,
            replacement: self.replacement,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    /// Hidden widths. `None` means four layers of 100 for 2-D data and one layer of 512 otherwise.
    pub arch: Option<Vec<usize>>,
    pub activation: Activation,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self { arch: None, activation: Activation::Relu }
    }
}

impl ModelSpec {
    pub fn hidden_for(&self, dims: usize) -> Vec<usize> {
        match &self.arch {
            Some(a) => a.clone(),
            None if dims == 2 => vec![100; 4],
            None => vec![512],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    /// `None` means 5000 for 2-D data and 20000 otherwise.
    pub epochs: Option<usize>,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Rows per step. `None` means full batch up to 1024 pairs, 1024 above that; 0 forces full batch.
    pub minibatch: Option<usize>,
}

impl Default for TrainSpec {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: None,
            lr: t.learning_rate,
            adam_beta1: t.adam_beta1,
            adam_beta2: t.adam_beta2,
            adam_eps: t.adam_eps,
            minibatch: None,
        }
    }
}

/// Largest pair set trained full batch by default, and the minibatch used above it.
pub const FULL_BATCH_LIMIT: usize = 1024;

impl TrainSpec {
    pub fn resolve(&self, dims: usize, pairs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs.unwrap_or(if dims == 2 { 5000 } else { 20000 }),
            learning_rate: self.lr,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_eps: self.adam_eps,
            minibatch: self.minibatch.unwrap_or(if pairs <= FULL_BATCH_LIMIT { 0 } else { FULL_BATCH_LIMIT }),
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSpec {
    pub n: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { n: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSpec {
    pub bins: usize,
    pub smoothing: f64,
    /// Fresh reference draws for toy targets. CSV targets are compared against the data itself.
    pub truth_n: usize,
}

impl Default for MetricsSpec {
    fn default() -> Self {
        Self { bins: DEFAULT_BINS, smoothing: DEFAULT_SMOOTHING, truth_n: 10_000 }
    }
}

/// Per-stage seed overrides; unset stages derive from the master seed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedOverrides {
    pub data: Option<u64>,
    pub label: Option<u64>,
    pub init: Option<u64>,
    pub train: Option<u64>,
    pub sample: Option<u64>,
    pub truth: Option<u64>,
}

/// Seeds actually used by each stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub master: u64,
    /// Toy generation: `s`.
    pub data: u64,
    /// Labeling: `s + 1`; inputs, batches and noise use `label`, `label + 1`, `label + 2`.
    pub label: u64,
    pub label_streams: LabelSeeds,
    /// Network initialization: `s + 4`.
    pub init: u64,
    /// Minibatch shuffling: `s + 5`.
    pub train: u64,
    /// Generator inputs: `s + 6`.
    pub sample: u64,
    /// Fresh toy reference for evaluation: `s + 7`.
    pub truth: u64,
}

pub const SEED_SCHEME: &str =
    "data = s, label = s+1 (inputs/batches/noise = label, label+1, label+2), init = s+4, train = s+5, sample = s+6, truth = s+7";

impl Seeds {
    pub fn derive(master: u64, o: &SeedOverrides) -> Self {
        let at = |k: u64| master.wrapping_add(k);
        let label = o.label.unwrap_or(at(1));
        Self {
            master,
            data: o.data.unwrap_or(master),
            label,
            label_streams: LabelSeeds::from_seed(label),
            init: o.init.unwrap_or(at(4)),
            train: o.train.unwrap_or(at(5)),
            sample: o.sample.unwrap_or(at(6)),
            truth: o.truth.unwrap_or(at(7)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    pub label: LabelSpec,
    pub model: ModelSpec,
    pub train: TrainSpec,
    pub sample: SampleSpec,
    pub metrics: MetricsSpec,
    pub seed: u64,
    pub seeds: SeedOverrides,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::default(),
            label: LabelSpec::default(),
            model: ModelSpec::default(),
            train: TrainSpec::default(),
            sample: SampleSpec::default(),
            metrics: MetricsSpec::default(),
            seed: 0,
            seeds: SeedOverrides::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::derive(self.seed, &self.seeds)
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }

    /// Range checks that need no data.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Usage(msg));
        if self.dataset.csv.is_none() && self.dataset.j == 0 {
            return fail("j must be ≥ 1".into());
        }
        if self.label.m == 0 {
            return fail("m must be ≥ 1".into());
        }
        if self.label.steps == Some(0) {
            return fail("steps must be ≥ 1".into());
        }
        if self.label.batch_size == Some(0) {
            return fail("batch_size must be ≥ 1".into());
        }
        Schedule::new(self.label.time_eps)?;
        if self.model.arch.as_ref().is_some_and(|a| a.contains(&0)) {
            return fail("hidden widths must be ≥ 1".into());
        }
        if !(self.train.lr > 0.0 && self.train.lr.is_finite()) {
            return fail(format!("lr must be > 0, got {}", self.train.lr));
        }
        if self.sample.n == 0 {
            return fail("n must be ≥ 1".into());
        }
        if self.metrics.bins < 2 {
            return fail(format!("bins must be ≥ 2, got {}", self.metrics.bins));
        }
        if !(self.metrics.smoothing > 0.0) {
            return fail("smoothing must be > 0".into());
        }
        if self.metrics.truth_n == 0 {
            return fail("truth_n must be ≥ 1".into());
        }
        Ok(())
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::read(path, e))?;
    Ok(hex(&Sha256::digest(bytes)))
}
