//! The method's stages on in-memory values, and the end-to-end pipeline.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;
use scorelabel_core::data::{self, generate_toy, ColumnScale, DataMatrix, PreprocessReport};
use scorelabel_core::integrate::{self, Trajectory};
use scorelabel_core::labeler::{generate_labels, LabeledPairSet};
use scorelabel_core::mlp::{self, layer_dims};
use scorelabel_core::score::BatchSampler;
use scorelabel_core::{metrics, rng, Matrix, MetricsReport, MlpModel, TrainReport};

use crate::config::{DatasetSpec, LabelSpec, MetricsSpec, ModelSpec, RunConfig, Seeds, TrainSpec};
use crate::csvio::{self, MetricsSummary};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, Outputs, TimingReport};
use crate::model_file;

/// What the preprocessing step did, as written next to the processed data.
#[derive(Debug, Clone, Serialize)]
pub struct PreprocessOutcome {
    pub input_dims: usize,
    pub columns: Vec<String>,
    pub pruning: Option<PreprocessReport>,
    /// Per-column (mean, std) of the kept columns before standardization.
    pub standardization: Option<Vec<ColumnScale>>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub id: String,
    pub data: DataMatrix,
    pub preprocess: PreprocessOutcome,
}

fn secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Pruning, then standardization, as switched on in `spec`.
pub fn preprocess(data: DataMatrix, spec: &DatasetSpec) -> Result<(DataMatrix, PreprocessOutcome)> {
    let input_dims = data.dims();
    let (data, pruning) = if spec.prune() {
        let (d, r) = data::prune_columns(&data, spec.corr_threshold, spec.discrete_max_distinct)?;
        (d, Some(r))
    } else {
        (data, None)
    };
    let data = if spec.standardize() { data::standardize(&data)? } else { data };
    let outcome = PreprocessOutcome {
        input_dims,
        columns: data.column_names().to_vec(),
        pruning,
        standardization: data.standardization().map(<[ColumnScale]>::to_vec),
    };
    Ok((data, outcome))
}

pub fn load_dataset(spec: &DatasetSpec, seeds: &Seeds) -> Result<Dataset> {
    let raw = match &spec.csv {
        Some(path) => csvio::load_csv(path, spec.has_header)?,
        None => generate_toy(spec.toy, spec.j, seeds.data)?,
    };
    let (data, preprocess) = preprocess(raw, spec)?;
    Ok(Dataset { id: spec.id(), data, preprocess })
}

/// Evaluation reference: fresh draws for toys, the data itself otherwise.
///
/// Fresh toy draws go through the same column selection and scaling as the data.
pub fn reference(spec: &DatasetSpec, metrics: &MetricsSpec, dataset: &Dataset, seeds: &Seeds) -> Result<Matrix> {
    if spec.csv.is_some() {
        return Ok(dataset.data.values().clone());
    }
    let fresh = generate_toy(spec.toy, metrics.truth_n, seeds.truth)?;
    let keep: Vec<usize> = dataset
        .data
        .column_names()
        .iter()
        .map(|name| fresh.column_names().iter().position(|n| n == name).expect("toy column"))
        .collect();
    let mut values = fresh.values().select_cols(&keep);
    if let Some(scales) = dataset.data.standardization() {
        for i in 0..values.rows() {
            for (v, s) in values.row_mut(i).iter_mut().zip(scales) {
                *v = (*v - s.mean) / s.std;
            }
        }
    }
    Ok(values)
}

/// Labeled pairs and the labeling wall time.
pub fn label(dataset: &Dataset, spec: &LabelSpec, seeds: &Seeds) -> Result<(LabeledPairSet, f64)> {
    let cfg = spec.integration(dataset.data.dims())?;
    let start = Instant::now();
    let pairs = generate_labels(&dataset.data, &dataset.id, spec.m, &cfg, &spec.score(), seeds.label)?;
    Ok((pairs, secs(start)))
}

pub fn trajectories(dataset: &Dataset, spec: &LabelSpec, count: usize, seeds: &Seeds) -> Result<Vec<Trajectory>> {
    if count == 0 {
        return Err(Error::Usage("n must be ≥ 1".into()));
    }
    let cfg = spec.integration(dataset.data.dims())?.recording(true);
    let streams = seeds.label_streams;
    let inputs = rng::standard_normal_matrix(count, dataset.data.dims(), streams.inputs);
    let mut sampler = BatchSampler::from_config(dataset.data.values(), &spec.score(), streams.batches)?;
    let solution = integrate::solve(&inputs, &cfg, &mut sampler, streams.noise)?;
    Ok(solution.trajectories.unwrap_or_default())
}

/// Trained generator, its loss history and the training wall time.
pub fn train(
    pairs: &LabeledPairSet,
    model_spec: &ModelSpec,
    train_spec: &TrainSpec,
    seeds: &Seeds,
) -> Result<(MlpModel, TrainReport, f64)> {
    let d = pairs.dims();
    let dims = layer_dims(d, &model_spec.hidden_for(d));
    let mut model = MlpModel::init(&dims, model_spec.activation, seeds.init)?;
    let cfg = train_spec.resolve(d, pairs.len(), seeds.train);
    let start = Instant::now();
    let report = mlp::train(&mut model, pairs, &cfg)?;
    Ok((model, report, secs(start)))
}

pub fn sample(model: &MlpModel, n: usize, seeds: &Seeds) -> (Matrix, f64) {
    let start = Instant::now();
    let samples = model.sample(n, seeds.sample);
    (samples, secs(start))
}

pub fn evaluate(truth: &Matrix, candidate: &Matrix, spec: &MetricsSpec) -> Result<MetricsReport> {
    Ok(metrics::compare(truth, candidate, spec.bins, spec.smoothing)?)
}

/// File names inside a pipeline output directory.
pub mod files {
    pub const DATA: &str = "data.csv";
    pub const PREPROCESS: &str = "preprocess.json";
    pub const PAIRS: &str = "pairs.csv";
    pub const MODEL: &str = "model.bin";
    pub const LOSS: &str = "loss.csv";
    pub const SAMPLES: &str = "samples.csv";
    pub const METRICS: &str = "metrics.json";
    pub const METRICS_LABELED: &str = "metrics_labeled.json";
    pub const HISTOGRAMS: &str = "histograms.csv";
    pub const TIMING: &str = "timing.json";
    pub const CONFIG: &str = "config.json";
    pub const MANIFEST: &str = "manifest.json";
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    pub timing: TimingReport,
    /// Labeled outputs against the reference.
    pub labeled: MetricsSummary,
    /// Generated samples against the reference.
    pub generated: MetricsSummary,
    pub final_loss: f64,
}

pub fn write_loss_history(report: &TrainReport, path: &Path) -> Result<()> {
    let losses = Matrix::from_vec(report.loss_history.len(), 1, report.loss_history.clone())?;
    let rows: Vec<f64> = (0..losses.rows()).flat_map(|e| [e as f64, losses.get(e, 0)]).collect();
    csvio::write_table(path, &["epoch".into(), "loss".into()], &Matrix::from_vec(losses.rows(), 2, rows)?)
}

/// Data, labels, training, sampling and evaluation, with every artifact written to `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutcome> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let dataset = load_dataset(&cfg.dataset, &seeds)?;
    let (pairs, label_s) = label(&dataset, &cfg.label, &seeds)?;
    let (model, train_report, train_s) = train(&pairs, &cfg.model, &cfg.train, &seeds)?;
    let (samples, sample_s) = sample(&model, cfg.sample.n, &seeds);
    let truth = reference(&cfg.dataset, &cfg.metrics, &dataset, &seeds)?;
    let labeled = evaluate(&truth, &pairs.outputs, &cfg.metrics)?;
    let generated = evaluate(&truth, &samples, &cfg.metrics)?;
    let timing = TimingReport::new(label_s, train_s, sample_s, samples.rows());

    let dir = &cfg.out_dir;
    let mut out = Outputs::new();
    csvio::save_csv(&dataset.data, &out.track(dir.join(files::DATA)))?;
    csvio::write_json(&out.track(dir.join(files::PREPROCESS)), &dataset.preprocess)?;
    let pairs_path = out.track(dir.join(files::PAIRS));
    out.track(csvio::sidecar_path(&pairs_path));
    csvio::save_pairs(&pairs, &pairs_path)?;
    model_file::save_model(&model, &out.track(dir.join(files::MODEL)))?;
    write_loss_history(&train_report, &out.track(dir.join(files::LOSS)))?;
    csvio::save_samples(&samples, &out.track(dir.join(files::SAMPLES)))?;
    let generated_summary = MetricsSummary::from(&generated);
    let labeled_summary = MetricsSummary::from(&labeled);
    csvio::write_json(&out.track(dir.join(files::METRICS)), &generated_summary)?;
    csvio::write_json(&out.track(dir.join(files::METRICS_LABELED)), &labeled_summary)?;
    csvio::save_histograms(&generated, &out.track(dir.join(files::HISTOGRAMS)))?;
    csvio::write_json(&out.track(dir.join(files::TIMING)), &timing)?;
    csvio::write_json(&out.track(dir.join(files::CONFIG)), cfg)?;
    let d = dataset.data.dims();
    let final_loss = train_report.loss_history.last().copied().unwrap_or(f64::NAN);
    let manifest_path = out.track(dir.join(files::MANIFEST));
    let mut manifest = Manifest::new("pipeline", cfg).details(json!({
        "dataset": dataset.id,
        "rows": dataset.data.rows(),
        "dims": d,
        "steps": cfg.label.steps_for(d),
        "batch_size": pairs.provenance.as_ref().map(|p| p.batch_size),
        "layer_dims": model.layer_dims(),
        "train": cfg.train.resolve(d, pairs.len(), seeds.train),
        "final_loss": final_loss,
        "reference_rows": truth.rows(),
        "timing": timing,
    }));
    if let Some(p) = &cfg.dataset.csv {
        manifest = manifest.input(p)?;
    }
    manifest.write(&out, &manifest_path)?;
    out.commit();
    Ok(PipelineOutcome {
        out_dir: dir.clone(),
        timing,
        labeled: labeled_summary,
        generated: generated_summary,
        final_loss,
    })
}
