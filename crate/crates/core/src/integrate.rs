//! Backward-in-time integration of ensembles from `t = 1 - eps` down to `t = eps`.
//!
//! Two processes share the same marginals:
//!
//! ```text
//! probability-flow ODE:  dz = [b(t) z - 1/2 sigma^2(t) S(z, t)] dt
//! reverse-time SDE:      dz = [b(t) z -     sigma^2(t) S(z, t)] dt + sigma(t) dW
//! ```
//!
//! Substituting the schedule and the posterior-mean form of the score estimate,
//! the ODE drift collapses to `(z - (1 + t) m(z, t)) / (2t)`. That form never
//! touches `b(t) = -1/(1-t)` and never divides by `beta_t^2`, so it is the one the
//! ODE solver uses by default; the assembled form stays available for checking.
//!
//! Both solvers are explicit first-order schemes (Euler and Euler-Maruyama) on a
//! uniform grid. Trajectories advance together one step at a time so a single
//! mini-batch per step can be shared by the whole ensemble.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::PreparedBatch;
use crate::math;
use crate::matrix::Matrix;
use crate::rng;
use crate::schedule::Schedule;
use crate::score::{estimate_score, BatchSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ode,
    Sde,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub num_steps: usize,
    pub schedule: Schedule,
    pub mode: Mode,
    pub record_trajectory: bool,
    /// Assemble the ODE drift from `b`, `sigma^2` and the score instead of the
    /// stabilized form.
    pub naive_drift: bool,
    /// Replace each final state with its posterior mean `m(z, eps)`.
    pub final_posterior_mean: bool,
}

impl IntegrationConfig {
    pub fn new(num_steps: usize, schedule: Schedule) -> Self {
        Self {
            num_steps,
            schedule,
            mode: Mode::Ode,
            record_trajectory: false,
            naive_drift: false,
            final_posterior_mean: false,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn recording(mut self, record: bool) -> Self {
        self.record_trajectory = record;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_steps == 0 {
            return Err(Error::config("steps must be >= 1"));
        }
        Schedule::new(self.schedule.eps()).map(|_| ())
    }

    pub fn time_grid(&self) -> Vec<f64> {
        self.schedule.time_grid(self.num_steps)
    }
}

/// States of one trajectory at every grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `(K + 1) x d`
    pub states: Matrix,
}

impl Trajectory {
    /// Sum of Euclidean step lengths along the path.
    pub fn total_variation(&self) -> f64 {
        (1..self.states.rows())
            .map(|k| {
                let sq: f64 = self
                    .states
                    .row(k)
                    .iter()
                    .zip(self.states.row(k - 1))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                math::sqrt(sq)
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// `M x d` states at `t = eps`.
    pub states: Matrix,
    /// One entry per input row when recording was requested.
    pub trajectories: Option<Vec<Trajectory>>,
}

/// Stabilized probability-flow drift `(z - (1 + t) m) / (2t)`.
pub fn ode_drift(schedule: &Schedule, z: &[f64], t: f64, batch: &Matrix) -> Vec<f64> {
    let t = schedule.clamp(t);
    let est = estimate_score(schedule, z, t, batch);
    let mut out = vec![0.0; z.len()];
    stabilized_drift(z, t, &est.posterior_mean, &mut out);
    out
}

/// Probability-flow drift assembled as `b(t) z - 1/2 sigma^2(t) S(z, t)`.
pub fn naive_ode_drift(schedule: &Schedule, z: &[f64], t: f64, batch: &Matrix) -> Vec<f64> {
    let t = schedule.clamp(t);
    let est = estimate_score(schedule, z, t, batch);
    let mut out = vec![0.0; z.len()];
    assembled_drift(schedule, z, t, &est.posterior_mean, 0.5, &mut out);
    out
}

#[inline]
fn stabilized_drift(z: &[f64], t: f64, m: &[f64], out: &mut [f64]) {
    let scale = 1.0 + t;
    let denom = 2.0 * t;
    for ((o, zi), mi) in out.iter_mut().zip(z).zip(m) {
        *o = (zi - scale * mi) / denom;
    }
}

/// `b(t) z - score_scale * sigma^2(t) * (alpha_t m - z) / beta_t^2`
#[inline]
fn assembled_drift(schedule: &Schedule, z: &[f64], t: f64, m: &[f64], score_scale: f64, out: &mut [f64]) {
    let b = schedule.drift_coef(t);
    let g = score_scale * schedule.diffusion_sq(t);
    let a = schedule.alpha(t);
    let var = schedule.beta_sq(t);
    for ((o, zi), mi) in out.iter_mut().zip(z).zip(m) {
        let score = (a * mi - zi) / var;
        *o = b * zi - g * score;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum DriftForm {
    Stabilized,
    Assembled { score_scale: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Dynamics {
    pub(crate) drift: DriftForm,
    /// Multiplier on `sigma(t)`; 0 turns the solver into a deterministic ODE solver.
    pub(crate) noise_scale: f64,
    pub(crate) noise_seed: u64,
}

impl Dynamics {
    fn ode(naive: bool) -> Self {
        let drift = if naive { DriftForm::Assembled { score_scale: 0.5 } } else { DriftForm::Stabilized };
        Self { drift, noise_scale: 0.0, noise_seed: 0 }
    }

    fn sde(noise_seed: u64) -> Self {
        Self { drift: DriftForm::Assembled { score_scale: 1.0 }, noise_scale: 1.0, noise_seed }
    }
}

/// Explicit Euler on the probability-flow ODE. Inputs are the `M x d` states at
/// `t = 1 - eps`; the result holds the states at `t = eps`.
pub fn solve_ode(inputs: &Matrix, cfg: &IntegrationConfig, sampler: &mut BatchSampler<'_>) -> Result<Solution> {
    integrate(inputs, cfg, sampler, Dynamics::ode(cfg.naive_drift))
}

/// Euler-Maruyama on the reverse-time SDE with Brownian increments drawn from `noise_seed`.
pub fn solve_sde(
    inputs: &Matrix,
    cfg: &IntegrationConfig,
    sampler: &mut BatchSampler<'_>,
    noise_seed: u64,
) -> Result<Solution> {
    integrate(inputs, cfg, sampler, Dynamics::sde(noise_seed))
}

/// Dispatches on `cfg.mode`.
pub fn solve(inputs: &Matrix, cfg: &IntegrationConfig, sampler: &mut BatchSampler<'_>, noise_seed: u64) -> Result<Solution> {
    match cfg.mode {
        Mode::Ode => solve_ode(inputs, cfg, sampler),
        Mode::Sde => solve_sde(inputs, cfg, sampler, noise_seed),
    }
}

enum Frozen {
    None,
    Shared(Matrix),
    PerTrajectory(Vec<Vec<usize>>),
}

pub(crate) fn integrate(
    inputs: &Matrix,
    cfg: &IntegrationConfig,
    sampler: &mut BatchSampler<'_>,
    dynamics: Dynamics,
) -> Result<Solution> {
    cfg.validate()?;
    let (m, d) = (inputs.rows(), inputs.cols());
    if d != sampler.dims() {
        return Err(Error::shape(alloc::format!("inputs have {d} dims, data has {}", sampler.dims())));
    }
    if let Some(i) = inputs.iter_rows().position(|r| r.iter().any(|v| !v.is_finite())) {
        return Err(Error::config(alloc::format!("input row {i} is not finite")));
    }
    let schedule = cfg.schedule;
    let grid = cfg.time_grid();
    let mut states = inputs.clone();
    let mut history: Vec<Matrix> = Vec::new();
    if cfg.record_trajectory {
        history.push(states.clone());
    }

    let frozen = match (sampler.resample_per_step(), sampler.shared()) {
        (true, _) => Frozen::None,
        (false, true) => Frozen::Shared(sampler.next_batch()),
        (false, false) => Frozen::PerTrajectory((0..m).map(|_| sampler.next_indices()).collect()),
    };
    let mut noise_rng = rng::stream(dynamics.noise_seed);
    let mut noise = Matrix::zeros(if dynamics.noise_scale != 0.0 { m } else { 0 }, d);
    let mut scratch = Scratch::new(sampler.batch_size(), d);

    for k in 0..cfg.num_steps {
        let t = grid[k];
        let dt = grid[k + 1] - t;
        if dynamics.noise_scale != 0.0 {
            rng::fill_standard_normal(&mut noise_rng, noise.as_mut_slice());
        }
        let step = Step { schedule: &schedule, t, dt, dynamics, noise: &noise };
        if sampler.shared() {
            let batch = match &frozen {
                Frozen::Shared(b) => PreparedBatch::new(b, schedule.alpha(t), schedule.beta_sq(t)),
                _ => PreparedBatch::new(&sampler.next_batch(), schedule.alpha(t), schedule.beta_sq(t)),
            };
            step.advance_shared(&mut states, &batch);
        } else {
            for i in 0..m {
                let idx = match &frozen {
                    Frozen::PerTrajectory(all) => all[i].clone(),
                    _ => sampler.next_indices(),
                };
                let rows = sampler.source().select_rows(&idx);
                let batch = PreparedBatch::new(&rows, schedule.alpha(t), schedule.beta_sq(t));
                step.advance_row(i, states.row_mut(i), &batch, &mut scratch);
            }
        }
        if let Some(i) = states.iter_rows().position(|r| r.iter().any(|v| !v.is_finite())) {
            return Err(Error::Integration { step: k, t, trajectory: i });
        }
        if cfg.record_trajectory {
            history.push(states.clone());
        }
    }

    if cfg.final_posterior_mean {
        let t = schedule.eps();
        let rows = match &frozen {
            Frozen::Shared(b) => b.clone(),
            _ => sampler.next_batch(),
        };
        let batch = PreparedBatch::new(&rows, schedule.alpha(t), schedule.beta_sq(t));
        for i in 0..m {
            batch.posterior_mean(states.row(i), &mut scratch.weights, &mut scratch.mean);
            states.row_mut(i).copy_from_slice(&scratch.mean);
        }
        if cfg.record_trajectory {
            // the projection replaces the recorded terminal state
            if let Some(last) = history.last_mut() {
                *last = states.clone();
            }
        }
    }

    let trajectories = cfg.record_trajectory.then(|| {
        (0..m)
            .map(|i| {
                let mut path = Matrix::zeros(history.len(), d);
                for (k, snap) in history.iter().enumerate() {
                    path.row_mut(k).copy_from_slice(snap.row(i));
                }
                Trajectory { times: grid.clone(), states: path }
            })
            .collect()
    });
    Ok(Solution { states, trajectories })
}

struct Scratch {
    weights: Vec<f64>,
    mean: Vec<f64>,
    drift: Vec<f64>,
}

impl Scratch {
    fn new(n: usize, d: usize) -> Self {
        Self { weights: vec![0.0; n], mean: vec![0.0; d], drift: vec![0.0; d] }
    }
}

struct Step<'s> {
    schedule: &'s Schedule,
    t: f64,
    dt: f64,
    dynamics: Dynamics,
    noise: &'s Matrix,
}

/// Rows per parallel work item.
#[cfg(feature = "parallel")]
const CHUNK_ROWS: usize = 32;

impl Step<'_> {
    fn advance_row(&self, i: usize, z: &mut [f64], batch: &PreparedBatch, scratch: &mut Scratch) {
        let Scratch { weights, mean, drift } = scratch;
        batch.posterior_mean(z, weights, mean);
        match self.dynamics.drift {
            DriftForm::Stabilized => stabilized_drift(z, self.t, mean, drift),
            DriftForm::Assembled { score_scale } => {
                assembled_drift(self.schedule, z, self.t, mean, score_scale, drift)
            }
        }
        for (zi, f) in z.iter_mut().zip(drift.iter()) {
            *zi += self.dt * *f;
        }
        if self.dynamics.noise_scale != 0.0 {
            let amp = self.dynamics.noise_scale
                * math::sqrt(self.schedule.diffusion_sq(self.t))
                * math::sqrt(self.dt.abs());
            for (zi, xi) in z.iter_mut().zip(self.noise.row(i)) {
                *zi += amp * xi;
            }
        }
    }

    #[cfg(not(feature = "parallel"))]
    fn advance_shared(&self, states: &mut Matrix, batch: &PreparedBatch) {
        let mut scratch = Scratch::new(batch.len(), states.cols());
        for i in 0..states.rows() {
            self.advance_row(i, states.row_mut(i), batch, &mut scratch);
        }
    }

    #[cfg(feature = "parallel")]
    fn advance_shared(&self, states: &mut Matrix, batch: &PreparedBatch) {
        use rayon::prelude::*;
        let d = states.cols().max(1);
        states
            .as_mut_slice()
            .par_chunks_mut(CHUNK_ROWS * d)
            .enumerate()
            .for_each_init(
                || Scratch::new(batch.len(), d),
                |scratch, (c, chunk)| {
                    for (r, z) in chunk.chunks_exact_mut(d).enumerate() {
                        self.advance_row(c * CHUNK_ROWS + r, z, batch, scratch);
                    }
                },
            );
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        rng::standard_normal_matrix(rows, cols, seed)
    }

    #[test]
    fn stabilized_equals_assembled() {
        let s = Schedule::default();
        let batch = lcg_matrix(50, 3, 1);
        let z = [0.4, -1.2, 2.0];
        let a = ode_drift(&s, &z, 0.5, &batch);
        let b = naive_ode_drift(&s, &z, 0.5, &batch);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-8 * y.abs().max(1e-12));
        }
    }

    #[test]
    fn single_point_drift() {
        let s = Schedule::default();
        let x = Matrix::from_rows(&[[2.0, -1.0]]).unwrap();
        let z = [0.5, 0.25];
        let drift = ode_drift(&s, &z, 0.5, &x);
        assert_eq!(drift, vec![0.5 - 1.5 * 2.0, 0.25 - 1.5 * -1.0]);
    }

    #[test]
    fn terminal_drift_uses_batch_mean() {
        let s = Schedule::default();
        let batch = lcg_matrix(20, 2, 3);
        let mean: Vec<f64> = (0..2).map(|j| batch.column(j).iter().sum::<f64>() / 20.0).collect();
        let z = [0.3, -0.4];
        let drift = ode_drift(&s, &z, 1.0 - 1e-3, &batch);
        for j in 0..2 {
            let want = (z[j] - 2.0 * mean[j]) / 2.0;
            assert!((drift[j] - want).abs() < 1e-2, "{} vs {want}", drift[j]);
        }
    }

    #[test]
    fn sde_without_noise_and_half_score_is_the_assembled_ode() {
        let data = lcg_matrix(200, 2, 5);
        let inputs = lcg_matrix(16, 2, 6);
        let mut cfg = IntegrationConfig::new(40, Schedule::default());
        cfg.naive_drift = true;
        let mut sa = BatchSampler::new(&data, 50, 7).unwrap();
        let ode = solve_ode(&inputs, &cfg, &mut sa).unwrap();
        let degenerate = Dynamics { drift: DriftForm::Assembled { score_scale: 0.5 }, noise_scale: 0.0, noise_seed: 99 };
        let mut sb = BatchSampler::new(&data, 50, 7).unwrap();
        let sde = integrate(&inputs, &cfg, &mut sb, degenerate).unwrap();
        assert_eq!(ode.states, sde.states);
    }

    #[test]
    fn single_point_target_attracts_everything() {
        let target = [1.5, -2.0];
        let data = Matrix::from_rows(&[target]).unwrap();
        let inputs = lcg_matrix(50, 2, 11);
        let cfg = IntegrationConfig::new(500, Schedule::new(1e-3).unwrap());
        let mut sampler = BatchSampler::new(&data, 1, 0).unwrap();
        let sol = solve_ode(&inputs, &cfg, &mut sampler).unwrap();
        let norm = (target[0] * target[0] + target[1] * target[1]).sqrt();
        for r in sol.states.iter_rows() {
            let err = ((r[0] - target[0]).powi(2) + (r[1] - target[1]).powi(2)).sqrt();
            assert!(err < 0.05 * norm + 0.05, "err {err}");
        }
    }

    #[test]
    fn recorded_trajectory_shape() {
        let data = lcg_matrix(30, 1, 2);
        let inputs = lcg_matrix(4, 1, 3);
        let cfg = IntegrationConfig::new(10, Schedule::default()).recording(true);
        let mut sampler = BatchSampler::new(&data, 30, 0).unwrap();
        let sol = solve_ode(&inputs, &cfg, &mut sampler).unwrap();
        let trajs = sol.trajectories.unwrap();
        assert_eq!(trajs.len(), 4);
        for (i, tr) in trajs.iter().enumerate() {
            assert_eq!(tr.times.len(), 11);
            assert_eq!(tr.states.rows(), 11);
            assert_eq!(tr.states.row(0), inputs.row(i));
            assert_eq!(tr.states.row(10), sol.states.row(i));
        }
    }

    #[test]
    fn per_trajectory_batches_are_deterministic() {
        let data = lcg_matrix(100, 2, 2);
        let inputs = lcg_matrix(5, 2, 3);
        let cfg = IntegrationConfig::new(20, Schedule::default());
        let run = |resample: bool| {
            let mut s = BatchSampler::new(&data, 10, 4)
                .unwrap()
                .with_shared_batches(false)
                .with_resample_per_step(resample);
            solve_ode(&inputs, &cfg, &mut s).unwrap().states
        };
        assert_eq!(run(true), run(true));
        assert_eq!(run(false), run(false));
        assert_ne!(run(true), run(false));
    }

    #[test]
    fn rejects_zero_steps_and_bad_inputs() {
        let data = lcg_matrix(10, 2, 2);
        let mut s = BatchSampler::new(&data, 10, 0).unwrap();
        let cfg = IntegrationConfig::new(0, Schedule::default());
        assert!(solve_ode(&lcg_matrix(2, 2, 0), &cfg, &mut s).is_err());
        let cfg = IntegrationConfig::new(5, Schedule::default());
        let bad = Matrix::from_rows(&[[f64::NAN, 0.0]]).unwrap();
        assert!(solve_ode(&bad, &cfg, &mut s).is_err());
        assert!(solve_ode(&lcg_matrix(2, 3, 0), &cfg, &mut s).is_err());
    }

    #[test]
    fn overflow_reports_step_and_trajectory() {
        let data = Matrix::from_rows(&[[1e300], [-1e300]]).unwrap();
        let inputs = Matrix::from_rows(&[[0.0], [1e300]]).unwrap();
        let cfg = IntegrationConfig::new(5, Schedule::default()).with_mode(Mode::Sde);
        let mut s = BatchSampler::new(&data, 2, 0).unwrap();
        match solve(&inputs, &cfg, &mut s, 1) {
            Err(Error::Integration { step, trajectory, .. }) => {
                assert_eq!(step, 0);
                assert!(trajectory < 2);
            }
            other => panic!("expected integration error, got {other:?}"),
        }
    }
}
