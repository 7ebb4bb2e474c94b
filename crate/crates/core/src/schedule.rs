//! The linear noising schedule `alpha_t = 1 - t`, `beta_t^2 = t` on `[0, 1]`.
//!
//! The forward SDE coefficients follow from the schedule:
//!
//! ```text
//! b(t)       = d/dt log(alpha_t)                      = -1 / (1 - t)
//! sigma^2(t) = d/dt beta_t^2 - 2 b(t) beta_t^2        = (1 + t) / (1 - t)
//! ```
//!
//! `b` and `sigma^2` diverge at `t = 1` and the score diverges at `t = 0`, so a
//! [`Schedule`] evaluates everything on the clamped domain `[eps, 1 - eps]`.
//! Out-of-domain times are clamped, never rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

pub const DEFAULT_TIME_EPS: f64 = 1e-3;

/// Unclamped `alpha_t`.
#[inline]
pub fn alpha(t: f64) -> f64 {
    1.0 - t
}

/// Unclamped `beta_t^2`.
#[inline]
pub fn beta_sq(t: f64) -> f64 {
    t
}

/// Unclamped drift coefficient `b(t)`.
#[inline]
pub fn drift_coef(t: f64) -> f64 {
    -1.0 / (1.0 - t)
}

/// Unclamped squared diffusion coefficient `sigma^2(t)`.
#[inline]
pub fn diffusion_sq(t: f64) -> f64 {
    (1.0 + t) / (1.0 - t)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    eps: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { eps: DEFAULT_TIME_EPS }
    }
}

impl Schedule {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::config(alloc::format!("time_eps must be in (0, 0.5), got {eps}")));
        }
        Ok(Self { eps })
    }

    #[inline]
    pub fn eps(&self) -> f64 {
        self.eps
    }

    #[inline]
    pub fn clamp(&self, t: f64) -> f64 {
        t.clamp(self.eps, 1.0 - self.eps)
    }

    #[inline]
    pub fn alpha(&self, t: f64) -> f64 {
        alpha(self.clamp(t))
    }

    #[inline]
    pub fn beta_sq(&self, t: f64) -> f64 {
        beta_sq(self.clamp(t))
    }

    #[inline]
    pub fn beta(&self, t: f64) -> f64 {
        math::sqrt(self.beta_sq(t))
    }

    #[inline]
    pub fn drift_coef(&self, t: f64) -> f64 {
        drift_coef(self.clamp(t))
    }

    #[inline]
    pub fn diffusion_sq(&self, t: f64) -> f64 {
        diffusion_sq(self.clamp(t))
    }

    /// Draw from `Q(Z_t | Z_0 = x0) = N(alpha_t x0, beta_t^2 I)` given standard normal `noise`.
    pub fn perturb(&self, x0: &[f64], t: f64, noise: &[f64], out: &mut [f64]) {
        assert_eq!(x0.len(), noise.len());
        assert_eq!(x0.len(), out.len());
        let a = self.alpha(t);
        let b = self.beta(t);
        for ((o, &x), &n) in out.iter_mut().zip(x0).zip(noise) {
            *o = a * x + b * n;
        }
    }

    /// Uniform decreasing grid `t_k = eps + (1 - 2 eps)(1 - k/K)`, `k = 0..=K`.
    ///
    /// The endpoints are exactly `1 - eps` and `eps`.
    pub fn time_grid(&self, steps: usize) -> alloc::vec::Vec<f64> {
        let span = 1.0 - 2.0 * self.eps;
        (0..=steps)
            .map(|k| match k {
                0 => 1.0 - self.eps,
                k if k == steps => self.eps,
                k => self.eps + span * (1.0 - k as f64 / steps as f64),
            })
            .collect()
    }
}
