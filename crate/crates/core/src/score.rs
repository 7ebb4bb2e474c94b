//! Training-free score estimation.
//!
//! For the Gaussian perturbation kernel `Q(z | x) = N(alpha_t x, beta_t^2 I)` the
//! score of the noised marginal is a posterior expectation over the data:
//!
//! ```text
//! S(z, t) = sum_n -(z - alpha_t x_n) / beta_t^2 * w_n
//! w_n     = Q(z | x_n) / sum_m Q(z | x_m)
//! ```
//!
//! With a mini-batch `{x_n}` of the dataset the sum is a Monte Carlo estimate.
//! The weights are a softmax of `-|z - alpha_t x_n|^2 / (2 beta_t^2)`; the Gaussian
//! normalizing constant cancels and is never formed. Writing
//! `m = sum_n w_n x_n` for the weighted posterior mean, the estimate is the affine
//! function `S = (alpha_t m - z) / beta_t^2`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::rng::{self, StreamRng};
use crate::schedule::Schedule;

pub const DEFAULT_BATCH_CAP: usize = 5000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEstimate {
    pub score: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    pub batch_size_used: usize,
}

/// Log of the normalized weights `w_n` for query `z` at time `t`.
pub fn log_weights(schedule: &Schedule, z: &[f64], t: f64, batch: &Matrix) -> Vec<f64> {
    assert_eq!(z.len(), batch.cols(), "query and batch dimensions differ");
    assert!(batch.rows() > 0, "empty batch");
    let a = schedule.alpha(t);
    let inv_two_var = 0.5 / schedule.beta_sq(t);
    let mut logits: Vec<f64> = batch
        .iter_rows()
        .map(|x| {
            let d2: f64 = z.iter().zip(x).map(|(zi, xi)| (zi - a * xi) * (zi - a * xi)).sum();
            -d2 * inv_two_var
        })
        .collect();
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    // shift before taking the log so large logits do not round the result
    for l in &mut logits {
        *l -= max;
    }
    let log_total = math::ln(logits.iter().map(|l| math::exp(*l)).sum::<f64>());
    for l in &mut logits {
        *l -= log_total;
    }
    logits
}

pub fn estimate_score(schedule: &Schedule, z: &[f64], t: f64, batch: &Matrix) -> ScoreEstimate {
    let lw = log_weights(schedule, z, t, batch);
    let d = z.len();
    let mut mean = vec![0.0; d];
    for (x, l) in batch.iter_rows().zip(&lw) {
        let w = math::exp(*l);
        for (m, xi) in mean.iter_mut().zip(x) {
            *m += w * xi;
        }
    }
    let score = score_from_mean(schedule, z, t, &mean);
    ScoreEstimate { score, posterior_mean: mean, batch_size_used: batch.rows() }
}

/// `(alpha_t m - z) / beta_t^2`.
pub fn score_from_mean(schedule: &Schedule, z: &[f64], t: f64, mean: &[f64]) -> Vec<f64> {
    let a = schedule.alpha(t);
    let var = schedule.beta_sq(t);
    z.iter().zip(mean).map(|(zi, mi)| (a * mi - zi) / var).collect()
}

/// How the score estimator draws its mini-batches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreConfig {
    /// Mini-batch size `N`; `None` means `min(J, 5000)`.
    pub batch_size: Option<usize>,
    /// Draw a fresh batch for every time step (otherwise one batch is reused throughout).
    pub resample_per_step: bool,
    /// One batch per step for the whole ensemble (otherwise one per trajectory).
    pub shared_batches: bool,
    pub replacement: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self { batch_size: None, resample_per_step: true, shared_batches: true, replacement: false }
    }
}

impl ScoreConfig {
    pub fn resolved_batch_size(&self, rows: usize) -> usize {
        self.batch_size.unwrap_or(rows.min(DEFAULT_BATCH_CAP))
    }
}

/// Draws mini-batches of rows from a dataset.
///
/// Without replacement every batch holds `N` distinct rows chosen uniformly. When
/// `N` equals the number of rows the full dataset is returned in stored order and
/// no randomness is consumed.
#[derive(Debug, Clone)]
pub struct BatchSampler<'a> {
    source: &'a Matrix,
    batch_size: usize,
    replacement: bool,
    resample_per_step: bool,
    shared: bool,
    rng: StreamRng,
}

impl<'a> BatchSampler<'a> {
    pub fn new(source: &'a Matrix, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if batch_size > source.rows() {
            return Err(Error::config(alloc::format!(
                "batch_size {batch_size} exceeds dataset size {}",
                source.rows()
            )));
        }
        Ok(Self {
            source,
            batch_size,
            replacement: false,
            resample_per_step: true,
            shared: true,
            rng: rng::stream(seed),
        })
    }

    /// Sampler configured from `cfg`, with the batch size resolved against `source`.
    pub fn from_config(source: &'a Matrix, cfg: &ScoreConfig, seed: u64) -> Result<Self> {
        let mut s = Self::new(source, cfg.resolved_batch_size(source.rows()), seed)?;
        s.replacement = cfg.replacement;
        s.resample_per_step = cfg.resample_per_step;
        s.shared = cfg.shared_batches;
        Ok(s)
    }

    pub fn with_replacement(mut self, replacement: bool) -> Self {
        self.replacement = replacement;
        self
    }

    /// Reuse the first batch for every step when `false`.
    pub fn with_resample_per_step(mut self, resample: bool) -> Self {
        self.resample_per_step = resample;
        self
    }

    /// Give each trajectory its own batch when `false`.
    pub fn with_shared_batches(mut self, shared: bool) -> Self {
        self.shared = shared;
        self
    }

    pub fn resample_per_step(&self) -> bool {
        self.resample_per_step
    }

    pub fn shared(&self) -> bool {
        self.shared
    }

    pub fn source(&self) -> &'a Matrix {
        self.source
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn dims(&self) -> usize {
        self.source.cols()
    }

    pub fn is_full_batch(&self) -> bool {
        !self.replacement && self.batch_size == self.source.rows()
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        let rows = self.source.rows();
        if self.is_full_batch() {
            (0..rows).collect()
        } else if self.replacement {
            (0..self.batch_size).map(|_| self.rng.random_range(0..rows)).collect()
        } else {
            rand::seq::index::sample(&mut self.rng, rows, self.batch_size).into_vec()
        }
    }

    pub fn next_batch(&mut self) -> Matrix {
        if self.is_full_batch() {
            return self.source.clone();
        }
        let idx = self.next_indices();
        self.source.select_rows(&idx)
    }
}
