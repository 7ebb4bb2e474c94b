//! Command-line front end.
//!
//! Every flag is optional: flags override the `--config` file, which overrides
//! the built-in defaults. Defaults are stated in each flag's help text.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use scorelabel_core::data::ToyDataset;
use scorelabel_core::integrate::Mode;
use scorelabel_core::Activation;

use crate::config::RunConfig;
use crate::csvio::{self, MetricsSummary};
use crate::error::{Error, Result};
use crate::manifest::{manifest_path, Manifest, Outputs};
use crate::model_file;
use crate::stages::{self, Dataset};

#[derive(Debug, Parser)]
#[command(name = "scorelabel", version, about = "Label Gaussian inputs with a training-free score ODE, fit a generator, evaluate it")]
pub struct Cli {
    /// Worker threads for labeling [default: all cores]
    #[arg(long, global = true, env = "SCORELABEL_THREADS")]
    pub threads: Option<usize>,

    /// JSON run configuration; flags take precedence [default: none]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a 2-D toy dataset
    Toy(ToyCmd),
    /// Prune and standardize a CSV dataset
    Preprocess(PreprocessCmd),
    /// Integrate the score ODE from Gaussian inputs to produce labeled pairs
    Label(LabelCmd),
    /// Fit a generator network to labeled pairs
    Train(TrainCmd),
    /// Draw samples from a trained generator
    Sample(SampleCmd),
    /// Compare samples against reference data, per dimension
    Eval(EvalCmd),
    /// Record full ODE or SDE trajectories
    Trajectory(TrajectoryCmd),
    /// Run data, label, train, sample and eval in one go
    Pipeline(PipelineCmd),
}

#[derive(Debug, Clone, Args)]
pub struct SeedArgs {
    /// Master seed; stage seeds derive from it by fixed offsets [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the toy-generation seed [default: seed]
    #[arg(long, value_name = "SEED")]
    pub data_seed: Option<u64>,
    /// Override the labeling seed [default: seed + 1]
    #[arg(long, value_name = "SEED")]
    pub label_seed: Option<u64>,
    /// Override the network-initialization seed [default: seed + 4]
    #[arg(long, value_name = "SEED")]
    pub init_seed: Option<u64>,
    /// Override the minibatch-shuffle seed [default: seed + 5]
    #[arg(long, value_name = "SEED")]
    pub train_seed: Option<u64>,
    /// Override the sampling seed [default: seed + 6]
    #[arg(long, value_name = "SEED")]
    pub sample_seed: Option<u64>,
    /// Override the evaluation-reference seed [default: seed + 7]
    #[arg(long, value_name = "SEED")]
    pub truth_seed: Option<u64>,
}

impl SeedArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.seed, self.seed);
        let o = &mut cfg.seeds;
        for (slot, v) in [
            (&mut o.data, self.data_seed),
            (&mut o.label, self.label_seed),
            (&mut o.init, self.init_seed),
            (&mut o.train, self.train_seed),
            (&mut o.sample, self.sample_seed),
            (&mut o.truth, self.truth_seed),
        ] {
            if v.is_some() {
                *slot = v;
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Toy dataset: eight_gaussians, two_spirals, checkerboard, rings, moons, swissroll, pinwheel, circles [default: eight_gaussians]
    #[arg(long, value_name = "NAME", conflicts_with = "data")]
    pub toy: Option<ToyDataset>,
    /// CSV dataset instead of a toy [default: none]
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// Number of toy samples J [default: 1000]
    #[arg(long)]
    pub j: Option<usize>,
    /// Whether the CSV has a header row [default: detected]
    #[arg(long, value_name = "BOOL")]
    pub header: Option<bool>,
    #[command(flatten)]
    pub prep: PrepArgs,
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let d = &mut cfg.dataset;
        if let Some(t) = self.toy {
            d.toy = t;
            d.csv = None;
        }
        if let Some(p) = &self.data {
            d.csv = Some(p.clone());
        }
        set(&mut d.j, self.j);
        if self.header.is_some() {
            d.has_header = self.header;
        }
        self.prep.apply(cfg);
    }
}

#[derive(Debug, Clone, Args)]
pub struct PrepArgs {
    /// Standardize columns to zero mean, unit std [default: true for CSV, false for toys]
    #[arg(long, value_name = "BOOL")]
    pub standardize: Option<bool>,
    /// Drop discrete and highly correlated columns [default: true for CSV, false for toys]
    #[arg(long, value_name = "BOOL")]
    pub prune: Option<bool>,
    /// Drop the later column of any pair with |Pearson r| above this [default: 0.98]
    #[arg(long, value_name = "R")]
    pub corr_threshold: Option<f64>,
    /// Columns with at most this many distinct values are discrete [default: 10]
    #[arg(long, value_name = "N")]
    pub discrete_max_distinct: Option<usize>,
}

impl PrepArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let d = &mut cfg.dataset;
        if self.standardize.is_some() {
            d.standardize = self.standardize;
        }
        if self.prune.is_some() {
            d.prune = self.prune;
        }
        set(&mut d.corr_threshold, self.corr_threshold);
        set(&mut d.discrete_max_distinct, self.discrete_max_distinct);
    }
}

#[derive(Debug, Clone, Args)]
pub struct IntegrateArgs {
    /// Euler steps K [default: 100 for 2-D data, 500 otherwise]
    #[arg(long, value_name = "K")]
    pub steps: Option<usize>,
    /// Time clamp: integrate over [eps, 1 - eps] [default: 0.001]
    #[arg(long, value_name = "EPS")]
    pub time_eps: Option<f64>,
    /// Reverse-time dynamics: ode or sde [default: ode]
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Score mini-batch size N [default: min(J, 5000)]
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,
    /// Draw a fresh mini-batch every step [default: true]
    #[arg(long, value_name = "BOOL")]
    pub resample_per_step: Option<bool>,
    /// One mini-batch per step for all trajectories [default: true]
    #[arg(long, value_name = "BOOL")]
    pub shared_batches: Option<bool>,
    /// Draw mini-batches with replacement [default: false]
    #[arg(long, value_name = "BOOL")]
    pub replacement: Option<bool>,
}

impl IntegrateArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let l = &mut cfg.label;
        if self.steps.is_some() {
            l.steps = self.steps;
        }
        set(&mut l.time_eps, self.time_eps);
        set(&mut l.mode, self.mode);
        if self.batch_size.is_some() {
            l.batch_size = self.batch_size;
        }
        set(&mut l.resample_per_step, self.resample_per_step);
        set(&mut l.shared_batches, self.shared_batches);
        set(&mut l.replacement, self.replacement);
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Hidden layer widths, comma separated [default: 100,100,100,100 for 2-D data, 512 otherwise]
    #[arg(long, value_delimiter = ',', value_name = "WIDTHS")]
    pub arch: Option<Vec<usize>>,
    /// Hidden activation: relu or tanh [default: relu]
    #[arg(long)]
    pub activation: Option<Activation>,
    /// Training epochs [default: 5000 for 2-D data, 20000 otherwise]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.005]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Adam first-moment decay [default: 0.9]
    #[arg(long)]
    pub adam_beta1: Option<f64>,
    /// Adam second-moment decay [default: 0.999]
    #[arg(long)]
    pub adam_beta2: Option<f64>,
    /// Adam denominator offset [default: 1e-8]
    #[arg(long)]
    pub adam_eps: Option<f64>,
    /// Rows per gradient step, 0 for full batch [default: full batch up to 1024 pairs, else 1024]
    #[arg(long)]
    pub minibatch: Option<usize>,
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.arch.is_some() {
            cfg.model.arch = self.arch.clone();
        }
        set(&mut cfg.model.activation, self.activation);
        let t = &mut cfg.train;
        if self.epochs.is_some() {
            t.epochs = self.epochs;
        }
        set(&mut t.lr, self.lr);
        set(&mut t.adam_beta1, self.adam_beta1);
        set(&mut t.adam_beta2, self.adam_beta2);
        set(&mut t.adam_eps, self.adam_eps);
        if self.minibatch.is_some() {
            t.minibatch = self.minibatch;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct MetricsArgs {
    /// Histogram bins per dimension [default: 50]
    #[arg(long)]
    pub bins: Option<usize>,
    /// Pseudo-count added to every bin before computing KL [default: 0.5]
    #[arg(long)]
    pub smoothing: Option<f64>,
    /// Fresh reference draws for toy targets [default: 10000]
    #[arg(long, value_name = "N")]
    pub truth_n: Option<usize>,
}

impl MetricsArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set(&mut cfg.metrics.bins, self.bins);
        set(&mut cfg.metrics.smoothing, self.smoothing);
        set(&mut cfg.metrics.truth_n, self.truth_n);
    }
}

#[derive(Debug, Args)]
pub struct ToyCmd {
    /// Toy dataset: eight_gaussians, two_spirals, checkerboard, rings, moons, swissroll, pinwheel, circles [default: eight_gaussians]
    #[arg(long, value_name = "NAME")]
    pub toy: Option<ToyDataset>,
    /// Number of samples J [default: 1000]
    #[arg(long)]
    pub j: Option<usize>,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Output CSV [required]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessCmd {
    /// Input CSV [required]
    #[arg(long)]
    pub data: PathBuf,
    /// Whether the CSV has a header row [default: detected]
    #[arg(long, value_name = "BOOL")]
    pub header: Option<bool>,
    #[command(flatten)]
    pub prep: PrepArgs,
    /// Processed CSV [required]
    #[arg(long)]
    pub out: PathBuf,
    /// Report of dropped columns and scaling [default: <out>.report.json]
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LabelCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of labeled pairs M [default: 1000]
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub integrate: IntegrateArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Also write every trajectory to this CSV [default: none]
    #[arg(long, value_name = "PATH")]
    pub record_trajectory: Option<PathBuf>,
    /// Pair CSV [required]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainCmd {
    /// Pair CSV written by `label` [required]
    #[arg(long)]
    pub pairs: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Model file [required]
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch loss CSV [default: <out>.loss.csv]
    #[arg(long, value_name = "PATH")]
    pub loss_history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleCmd {
    /// Model file written by `train` [required]
    #[arg(long)]
    pub model: PathBuf,
    /// Number of samples [default: 10000]
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Sample CSV [required]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalCmd {
    /// Candidate samples CSV [required]
    #[arg(long)]
    pub samples: PathBuf,
    /// Reference CSV used as-is [default: derived from the dataset flags]
    #[arg(long, value_name = "PATH")]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub metrics: MetricsArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Metrics JSON [required]
    #[arg(long)]
    pub out: PathBuf,
    /// Histogram CSV for plotting [default: none]
    #[arg(long, value_name = "PATH")]
    pub histograms: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrajectoryCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of trajectories [default: 32]
    #[arg(long, default_value_t = 32, hide_default_value = true)]
    pub n: usize,
    #[command(flatten)]
    pub integrate: IntegrateArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Trajectory CSV [required]
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineCmd {
    #[command(flatten)]
    pub data: DataArgs,
    /// Number of labeled pairs M [default: 1000]
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub integrate: IntegrateArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Generated samples to evaluate [default: 10000]
    #[arg(long)]
    pub n: Option<usize>,
    #[command(flatten)]
    pub metrics: MetricsArgs,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Output directory [default: out]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    match s {
        "ode" => Ok(Mode::Ode),
        "sde" => Ok(Mode::Sde),
        _ => Err(format!("unknown mode {s:?}, expected ode or sde")),
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig> {
    match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

/// Configures the labeling thread pool.
pub fn init_threads(threads: Option<usize>) -> Result<()> {
    if threads == Some(0) {
        return Err(Error::Usage("threads must be ≥ 1".into()));
    }
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    init_threads(cli.threads)?;
    let mut cfg = base_config(&cli)?;
    match &cli.command {
        Command::Toy(c) => {
            set(&mut cfg.dataset.toy, c.toy);
            cfg.dataset.csv = None;
            set(&mut cfg.dataset.j, c.j);
            c.seeds.apply(&mut cfg);
            cmd_toy(&cfg, &c.out)
        }
        Command::Preprocess(c) => {
            cfg.dataset.csv = Some(c.data.clone());
            if c.header.is_some() {
                cfg.dataset.has_header = c.header;
            }
            c.prep.apply(&mut cfg);
            let report = c.report.clone().unwrap_or_else(|| suffixed(&c.out, ".report.json"));
            cmd_preprocess(&cfg, &c.out, &report)
        }
        Command::Label(c) => {
            c.data.apply(&mut cfg);
            set(&mut cfg.label.m, c.m);
            c.integrate.apply(&mut cfg);
            c.seeds.apply(&mut cfg);
            cmd_label(&cfg, &c.out, c.record_trajectory.as_deref())
        }
        Command::Train(c) => {
            c.model.apply(&mut cfg);
            c.seeds.apply(&mut cfg);
            let loss = c.loss_history.clone().unwrap_or_else(|| suffixed(&c.out, ".loss.csv"));
            cmd_train(&cfg, &c.pairs, &c.out, &loss)
        }
        Command::Sample(c) => {
            set(&mut cfg.sample.n, c.n);
            c.seeds.apply(&mut cfg);
            cmd_sample(&cfg, &c.model, &c.out)
        }
        Command::Eval(c) => {
            c.data.apply(&mut cfg);
            c.metrics.apply(&mut cfg);
            c.seeds.apply(&mut cfg);
            cmd_eval(&cfg, &c.samples, c.truth.as_deref(), &c.out, c.histograms.as_deref())
        }
        Command::Trajectory(c) => {
            c.data.apply(&mut cfg);
            c.integrate.apply(&mut cfg);
            c.seeds.apply(&mut cfg);
            cmd_trajectory(&cfg, c.n, &c.out)
        }
        Command::Pipeline(c) => {
            c.data.apply(&mut cfg);
            set(&mut cfg.label.m, c.m);
            c.integrate.apply(&mut cfg);
            c.model.apply(&mut cfg);
            set(&mut cfg.sample.n, c.n);
            c.metrics.apply(&mut cfg);
            c.seeds.apply(&mut cfg);
            set(&mut cfg.out_dir, c.out_dir.clone());
            let outcome = stages::run_pipeline(&cfg)?;
            let t = outcome.timing;
            println!(
                "label {:.3}s  train {:.3}s  sample {:.3}s ({} samples, {:.0}/s)  max KL labeled {:.4} generated {:.4}",
                t.label_s,
                t.train_s,
                t.sample_s,
                t.sample_count,
                t.samples_per_s,
                outcome.labeled.max_kl(),
                outcome.generated.max_kl()
            );
            Ok(())
        }
    }
}

fn suffixed(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    stages::load_dataset(&cfg.dataset, &cfg.seeds())
}

pub fn cmd_toy(cfg: &RunConfig, out_path: &Path) -> Result<()> {
    let dataset = load(cfg)?;
    let mut out = Outputs::new();
    csvio::save_csv(&dataset.data, &out.track(out_path))?;
    let m = out.track(manifest_path(out_path));
    Manifest::new("toy", cfg).details(json!({ "dataset": dataset.id, "rows": dataset.data.rows() })).write(&out, &m)?;
    out.commit();
    Ok(())
}

pub fn cmd_preprocess(cfg: &RunConfig, out_path: &Path, report_path: &Path) -> Result<()> {
    let dataset = load(cfg)?;
    let mut out = Outputs::new();
    csvio::save_csv(&dataset.data, &out.track(out_path))?;
    csvio::write_json(&out.track(report_path), &dataset.preprocess)?;
    let m = out.track(manifest_path(out_path));
    let input = cfg.dataset.csv.as_deref().expect("preprocess reads a CSV");
    Manifest::new("preprocess", cfg)
        .input(input)?
        .details(json!({ "input_dims": dataset.preprocess.input_dims, "final_dims": dataset.data.dims() }))
        .write(&out, &m)?;
    out.commit();
    Ok(())
}

pub fn cmd_label(cfg: &RunConfig, out_path: &Path, trajectory_path: Option<&Path>) -> Result<()> {
    let dataset = load(cfg)?;
    let seeds = cfg.seeds();
    let (pairs, label_s) = stages::label(&dataset, &cfg.label, &seeds)?;
    let mut out = Outputs::new();
    out.track(csvio::sidecar_path(out_path));
    csvio::save_pairs(&pairs, &out.track(out_path))?;
    if let Some(p) = trajectory_path {
        let trajectories = stages::trajectories(&dataset, &cfg.label, cfg.label.m, &seeds)?;
        csvio::save_trajectories(&trajectories, &out.track(p))?;
    }
    let m = out.track(manifest_path(out_path));
    let mut manifest = Manifest::new("label", cfg).details(json!({
        "dataset": dataset.id,
        "rows": dataset.data.rows(),
        "dims": dataset.data.dims(),
        "steps": cfg.label.steps_for(dataset.data.dims()),
        "provenance": pairs.provenance,
        "label_s": label_s,
    }));
    if let Some(p) = &cfg.dataset.csv {
        manifest = manifest.input(p)?;
    }
    manifest.write(&out, &m)?;
    out.commit();
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig, pairs_path: &Path, out_path: &Path, loss_path: &Path) -> Result<()> {
    cfg.validate()?;
    let pairs = csvio::load_pairs(pairs_path)?;
    let seeds = cfg.seeds();
    let (model, report, train_s) = stages::train(&pairs, &cfg.model, &cfg.train, &seeds)?;
    let mut out = Outputs::new();
    model_file::save_model(&model, &out.track(out_path))?;
    stages::write_loss_history(&report, &out.track(loss_path))?;
    let m = out.track(manifest_path(out_path));
    Manifest::new("train", cfg)
        .input(pairs_path)?
        .details(json!({
            "layer_dims": model.layer_dims(),
            "num_params": model.num_params(),
            "train": cfg.train.resolve(pairs.dims(), pairs.len(), seeds.train),
            "final_loss": report.loss_history.last(),
            "train_s": train_s,
        }))
        .write(&out, &m)?;
    out.commit();
    Ok(())
}

pub fn cmd_sample(cfg: &RunConfig, model_path: &Path, out_path: &Path) -> Result<()> {
    cfg.validate()?;
    let model = model_file::load_model(model_path)?;
    let (samples, sample_s) = stages::sample(&model, cfg.sample.n, &cfg.seeds());
    let mut out = Outputs::new();
    csvio::save_samples(&samples, &out.track(out_path))?;
    let m = out.track(manifest_path(out_path));
    let rate = if sample_s > 0.0 { samples.rows() as f64 / sample_s } else { f64::INFINITY };
    Manifest::new("sample", cfg)
        .input(model_path)?
        .details(json!({ "sample_count": samples.rows(), "sample_s": sample_s, "samples_per_s": rate }))
        .write(&out, &m)?;
    out.commit();
    Ok(())
}

pub fn cmd_eval(
    cfg: &RunConfig,
    samples_path: &Path,
    truth_path: Option<&Path>,
    out_path: &Path,
    hist_path: Option<&Path>,
) -> Result<()> {
    cfg.validate()?;
    let (samples, _) = csvio::read_table(samples_path, None)?;
    let truth = match truth_path {
        Some(p) => csvio::read_table(p, None)?.0,
        None => {
            let dataset = load(cfg)?;
            stages::reference(&cfg.dataset, &cfg.metrics, &dataset, &cfg.seeds())?
        }
    };
    let report = stages::evaluate(&truth, &samples, &cfg.metrics)?;
    let mut out = Outputs::new();
    csvio::write_json(&out.track(out_path), &MetricsSummary::from(&report))?;
    if let Some(p) = hist_path {
        csvio::save_histograms(&report, &out.track(p))?;
    }
    let m = out.track(manifest_path(out_path));
    let mut manifest = Manifest::new("eval", cfg).input(samples_path)?;
    if let Some(p) = truth_path.or(cfg.dataset.csv.as_deref()) {
        manifest = manifest.input(p)?;
    }
    manifest.details(json!({ "reference_rows": truth.rows(), "max_kl": report.max_kl() })).write(&out, &m)?;
    out.commit();
    Ok(())
}

pub fn cmd_trajectory(cfg: &RunConfig, count: usize, out_path: &Path) -> Result<()> {
    let dataset = load(cfg)?;
    let trajectories = stages::trajectories(&dataset, &cfg.label, count, &cfg.seeds())?;
    let mut out = Outputs::new();
    csvio::save_trajectories(&trajectories, &out.track(out_path))?;
    let mean_tv = trajectories.iter().map(|t| t.total_variation()).sum::<f64>() / count as f64;
    let m = out.track(manifest_path(out_path));
    Manifest::new("trajectory", cfg)
        .details(json!({
            "dataset": dataset.id,
            "count": count,
            "mode": cfg.label.mode,
            "steps": cfg.label.steps_for(dataset.data.dims()),
            "mean_total_variation": mean_tv,
        }))
        .write(&out, &m)?;
    out.commit();
    Ok(())
}
