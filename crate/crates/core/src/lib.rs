//! Supervised training of generative models from training-free score estimates.
//!
//! The pipeline has three stages:
//!
//! 1. [`labeler`] draws standard-normal inputs and pushes each one through the
//!    probability-flow ODE of a linear diffusion schedule ([`schedule`]). The score
//!    that drives the ODE is never learned: [`score`] estimates it directly from a
//!    mini-batch of the observed data with a softmax-weighted Monte Carlo sum.
//! 2. [`mlp`] fits a plain feed-forward network to the resulting `(input, output)`
//!    pairs with an MSE loss and Adam.
//! 3. [`metrics`] compares marginal histograms, means and standard deviations of
//!    the labeled and generated samples against the data.
//!
//! The crate is `no_std` (with `alloc`). File formats, timing and the command line
//! front end live in the `scorelabel` crate. Enable the `parallel` feature to step
//! trajectory ensembles on a rayon pool; results are bit-identical either way.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod error;
pub mod integrate;
pub mod labeler;
pub mod matrix;
pub mod metrics;
pub mod mlp;
pub mod rng;
pub mod schedule;
pub mod score;

mod kernels;
mod math;

pub use data::{DataMatrix, PreprocessReport, ToyDataset};
pub use error::{Error, Result};
pub use integrate::{IntegrationConfig, Mode, Trajectory};
pub use labeler::{LabeledPairSet, Provenance};
pub use matrix::Matrix;
pub use metrics::{MarginalHistogram, MetricsReport};
pub use mlp::{Activation, MlpModel, TrainConfig, TrainReport};
pub use schedule::Schedule;
pub use score::{BatchSampler, ScoreConfig, ScoreEstimate};
