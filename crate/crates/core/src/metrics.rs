//! Per-dimension comparison of a candidate sample set against the data.
//!
//! Marginals are histograms on edges anchored to the data: the data's range,
//! padded by 2.5% on each side, split into `B` equal bins. Candidate samples
//! outside that range are clipped into the boundary bins and counted. KL
//! divergences add `smoothing` pseudo-counts to every bin before normalizing so
//! they stay finite when a bin is empty.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::column_stats;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

pub const DEFAULT_BINS: usize = 50;
pub const DEFAULT_SMOOTHING: f64 = 0.5;
/// Fraction of the data range added on each side of the histogram edges.
pub const EDGE_PADDING: f64 = 0.025;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalHistogram {
    pub dim_index: usize,
    /// `B + 1` strictly increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Normalized so that `sum(density * width) = 1`.
    pub density: Vec<f64>,
    /// Samples that fell outside the edges and were clipped into the end bins.
    pub clipped: u64,
}

impl MarginalHistogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.edges.windows(2).map(|w| w[1] - w[0])
    }

    /// Density after adding `smoothing` pseudo-counts to each bin.
    pub fn smoothed_density(&self, smoothing: f64) -> Vec<f64> {
        let denom = self.total() as f64 + smoothing * self.bins() as f64;
        self.counts.iter().zip(self.widths()).map(|(&c, w)| (c as f64 + smoothing) / denom / w).collect()
    }
}

/// `bins` equal-width edges spanning `[min, max]` of `values`, padded on both sides.
pub fn padded_edges(values: &[f64], bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::config(format!("need at least 2 bins, got {bins}")));
    }
    if values.is_empty() {
        return Err(Error::Comparison("cannot build edges from an empty column".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    // a constant column still needs a non-degenerate span
    let pad = if range > 0.0 { EDGE_PADDING * range } else { 0.5 };
    Ok(uniform_edges(lo - pad, hi + pad, bins))
}

pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = (hi - lo) / bins as f64;
    (0..=bins).map(|b| if b == bins { hi } else { lo + w * b as f64 }).collect()
}

/// Histogram of column `dim` of `samples` on the given edges.
pub fn marginal_hist(samples: &Matrix, dim: usize, edges: &[f64]) -> Result<MarginalHistogram> {
    let bins = edges.len().saturating_sub(1);
    if bins < 2 {
        return Err(Error::config(format!("need at least 2 bins, got {bins}")));
    }
    if !edges.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::config("histogram edges must be strictly increasing"));
    }
    if dim >= samples.cols() {
        return Err(Error::shape(format!("dimension {dim} out of range for {} columns", samples.cols())));
    }
    if samples.rows() == 0 {
        return Err(Error::Comparison("cannot histogram an empty sample set".into()));
    }
    let (lo, hi) = (edges[0], edges[bins]);
    let mut counts = vec![0u64; bins];
    let mut clipped = 0;
    for row in samples.iter_rows() {
        let v = row[dim];
        if v < lo || v > hi {
            clipped += 1;
        }
        counts[bin_index(edges, v)] += 1;
    }
    let n = samples.rows() as f64;
    let density = counts.iter().zip(edges.windows(2)).map(|(&c, w)| c as f64 / n / (w[1] - w[0])).collect();
    Ok(MarginalHistogram { dim_index: dim, edges: edges.to_vec(), counts, density, clipped })
}

/// Bin containing `v`; values outside the edges land in the end bins.
fn bin_index(edges: &[f64], v: f64) -> usize {
    let bins = edges.len() - 1;
    // first edge strictly greater than v, minus one
    let upper = edges.partition_point(|&e| e <= v);
    upper.saturating_sub(1).min(bins - 1)
}

/// `KL(p || q)` between two histograms on identical edges, with additive smoothing.
pub fn kl_1d(p: &MarginalHistogram, q: &MarginalHistogram, smoothing: f64) -> Result<f64> {
    if p.edges != q.edges {
        return Err(Error::Comparison("histograms have different edges".into()));
    }
    if !(smoothing > 0.0) {
        return Err(Error::config("smoothing must be > 0"));
    }
    let pd = p.smoothed_density(smoothing);
    let qd = q.smoothed_density(smoothing);
    let kl: f64 = pd
        .iter()
        .zip(&qd)
        .zip(p.widths())
        .map(|((a, b), w)| a * math::ln(a / b) * w)
        .sum();
    Ok(if kl < 0.0 { 0.0 } else { kl })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimComparison {
    pub dim: usize,
    /// `KL(truth || candidate)`
    pub kl_fwd: f64,
    /// `KL(candidate || truth)`
    pub kl_rev: f64,
    pub mean_truth: f64,
    pub mean_cand: f64,
    pub std_truth: f64,
    pub std_cand: f64,
    pub truth_hist: MarginalHistogram,
    pub cand_hist: MarginalHistogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dims: Vec<DimComparison>,
    pub bins: usize,
    pub smoothing: f64,
}

impl MetricsReport {
    pub fn max_kl(&self) -> f64 {
        self.dims.iter().map(|d| d.kl_fwd).fold(0.0, f64::max)
    }
}

/// Compare every marginal of `candidate` against `truth`.
pub fn compare(truth: &Matrix, candidate: &Matrix, bins: usize, smoothing: f64) -> Result<MetricsReport> {
    if truth.cols() != candidate.cols() {
        return Err(Error::Comparison(format!(
            "truth has {} dims, candidate has {}",
            truth.cols(),
            candidate.cols()
        )));
    }
    if truth.rows() == 0 || candidate.rows() == 0 {
        return Err(Error::Comparison("empty sample set".into()));
    }
    let mut dims = Vec::with_capacity(truth.cols());
    for j in 0..truth.cols() {
        let tcol = truth.column(j);
        let ccol = candidate.column(j);
        let edges = padded_edges(&tcol, bins)?;
        let th = marginal_hist(truth, j, &edges)?;
        let ch = marginal_hist(candidate, j, &edges)?;
        let (mean_truth, std_truth) = column_stats(&tcol);
        let (mean_cand, std_cand) = column_stats(&ccol);
        dims.push(DimComparison {
            dim: j,
            kl_fwd: kl_1d(&th, &ch, smoothing)?,
            kl_rev: kl_1d(&ch, &th, smoothing)?,
            mean_truth,
            mean_cand,
            std_truth,
            std_cand,
            truth_hist: th,
            cand_hist: ch,
        });
    }
    Ok(MetricsReport { dims, bins, smoothing })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn point_mass_fills_one_bin() {
        let s = Matrix::from_rows(&[[0.35], [0.35], [0.35]]).unwrap();
        let edges = uniform_edges(0.0, 1.0, 10);
        let h = marginal_hist(&s, 0, &edges).unwrap();
        assert_eq!(h.counts[3], 3);
        assert!((h.density[3] - 10.0).abs() < 1e-12);
        assert_eq!(h.density.iter().filter(|&&d| d > 0.0).count(), 1);
    }

    #[test]
    fn density_integrates_to_one_and_clips() {
        let s = rng::standard_normal_matrix(5000, 1, 2);
        let edges = uniform_edges(-1.0, 1.0, 20);
        let h = marginal_hist(&s, 0, &edges).unwrap();
        let mass: f64 = h.density.iter().zip(h.widths()).map(|(d, w)| d * w).sum();
        assert!((mass - 1.0).abs() < 1e-9);
        assert!(h.clipped > 1000);
        assert_eq!(h.total(), 5000);
    }

    #[test]
    fn boundary_values_are_binned() {
        let edges = uniform_edges(0.0, 1.0, 4);
        assert_eq!(bin_index(&edges, 0.0), 0);
        assert_eq!(bin_index(&edges, 0.25), 1);
        assert_eq!(bin_index(&edges, 1.0), 3);
        assert_eq!(bin_index(&edges, -5.0), 0);
        assert_eq!(bin_index(&edges, 5.0), 3);
    }

    #[test]
    fn too_few_bins_rejected() {
        let s = Matrix::from_rows(&[[0.3]]).unwrap();
        assert!(marginal_hist(&s, 0, &[0.0, 1.0]).is_err());
        assert!(padded_edges(&[1.0], 1).is_err());
    }

    #[test]
    fn kl_self_is_zero_and_empty_bins_are_finite() {
        let s = rng::standard_normal_matrix(1000, 1, 2);
        let edges = uniform_edges(-4.0, 4.0, 30);
        let p = marginal_hist(&s, 0, &edges).unwrap();
        assert_eq!(kl_1d(&p, &p, 0.5).unwrap(), 0.0);

        let q = marginal_hist(&Matrix::from_rows(&[[3.9]]).unwrap(), 0, &edges).unwrap();
        let kl = kl_1d(&p, &q, 0.5).unwrap();
        assert!(kl.is_finite() && kl > 0.0);
    }

    #[test]
    fn kl_rejects_mismatched_edges() {
        let s = rng::standard_normal_matrix(10, 1, 2);
        let p = marginal_hist(&s, 0, &uniform_edges(-4.0, 4.0, 10)).unwrap();
        let q = marginal_hist(&s, 0, &uniform_edges(-4.0, 4.0, 11)).unwrap();
        assert!(matches!(kl_1d(&p, &q, 0.5), Err(Error::Comparison(_))));
    }

    #[test]
    fn self_comparison_and_permutation() {
        let truth = rng::standard_normal_matrix(400, 3, 8);
        let r = compare(&truth, &truth, 50, 0.5).unwrap();
        for d in &r.dims {
            assert_eq!(d.kl_fwd, 0.0);
            assert_eq!(d.mean_truth, d.mean_cand);
            assert_eq!(d.std_truth, d.std_cand);
        }
        let rev: Vec<usize> = (0..400).rev().collect();
        let shuffled = truth.select_rows(&rev);
        let r2 = compare(&truth, &shuffled, 50, 0.5).unwrap();
        for (a, b) in r.dims.iter().zip(&r2.dims) {
            assert_eq!(a.kl_fwd, b.kl_fwd);
            assert_eq!(a.truth_hist, b.truth_hist);
            assert_eq!(a.cand_hist, b.cand_hist);
            assert!((a.mean_cand - b.mean_cand).abs() < 1e-15);
        }
        assert!(compare(&truth, &rng::standard_normal_matrix(5, 2, 0), 50, 0.5).is_err());
    }
}
