//! Builds the supervised training set: standard-normal inputs paired with the
//! terminal states of the probability-flow ODE started from them.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::integrate::{self, IntegrationConfig, Mode};
use crate::matrix::Matrix;
use crate::rng;
use crate::score::{BatchSampler, ScoreConfig};

/// Seeds derived from the labeling seed `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSeeds {
    /// Standard-normal inputs: `s`.
    pub inputs: u64,
    /// Mini-batch sampler: `s + 1`.
    pub batches: u64,
    /// Brownian increments (SDE mode only): `s + 2`.
    pub noise: u64,
}

impl LabelSeeds {
    pub fn from_seed(seed: u64) -> Self {
        Self { inputs: seed, batches: seed.wrapping_add(1), noise: seed.wrapping_add(2) }
    }
}

/// Everything needed to regenerate a pair set bit for bit (given the same data).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub steps: usize,
    pub time_eps: f64,
    pub batch_size: usize,
    pub mode: Mode,
    pub score: ScoreConfig,
    pub seed: u64,
    pub seeds: LabelSeeds,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPairSet {
    /// `M x d` standard-normal draws.
    pub inputs: Matrix,
    /// `M x d` ODE terminal states, aligned with `inputs` by row.
    pub outputs: Matrix,
    pub provenance: Option<Provenance>,
}

impl LabeledPairSet {
    pub fn new(inputs: Matrix, outputs: Matrix, provenance: Option<Provenance>) -> Result<Self> {
        if inputs.rows() != outputs.rows() || inputs.cols() != outputs.cols() {
            return Err(Error::shape(alloc::format!(
                "inputs are {}x{} but outputs are {}x{}",
                inputs.rows(),
                inputs.cols(),
                outputs.rows(),
                outputs.cols()
            )));
        }
        if !inputs.is_finite() || !outputs.is_finite() {
            return Err(Error::config("labeled pairs must be finite"));
        }
        Ok(Self { inputs, outputs, provenance })
    }

    pub fn len(&self) -> usize {
        self.inputs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.rows() == 0
    }

    pub fn dims(&self) -> usize {
        self.inputs.cols()
    }
}

/// Draw `m` standard-normal inputs and label each with its ODE terminal state.
///
/// All trajectories are integrated as one ensemble. Any non-finite state aborts the
/// whole run with the offending trajectory index; no pairs are silently dropped.
pub fn generate_labels(
    data: &DataMatrix,
    dataset_id: &str,
    m: usize,
    cfg: &IntegrationConfig,
    score_cfg: &ScoreConfig,
    seed: u64,
) -> Result<LabeledPairSet> {
    if m == 0 {
        return Err(Error::config("m must be ≥ 1"));
    }
    cfg.validate()?;
    let seeds = LabelSeeds::from_seed(seed);
    let inputs = rng::standard_normal_matrix(m, data.dims(), seeds.inputs);
    let mut sampler = BatchSampler::from_config(data.values(), score_cfg, seeds.batches)?;
    let cfg = IntegrationConfig { record_trajectory: false, ..*cfg };
    let solution = integrate::solve(&inputs, &cfg, &mut sampler, seeds.noise)?;
    let provenance = Provenance {
        dataset: dataset_id.into(),
        steps: cfg.num_steps,
        time_eps: cfg.schedule.eps(),
        batch_size: sampler.batch_size(),
        mode: cfg.mode,
        score: *score_cfg,
        seed,
        seeds,
    };
    LabeledPairSet::new(inputs, solution.states, Some(provenance))
}
