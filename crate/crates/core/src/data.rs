//! Observed datasets: toy 2D generators and tabular preprocessing.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;
use crate::rng::{self, standard_normal};

pub const DEFAULT_CORR_THRESHOLD: f64 = 0.98;
pub const DEFAULT_DISCRETE_MAX_DISTINCT: usize = 10;

/// Per-column affine map applied by [`standardize`]: `standardized = (raw - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub std: f64,
}

/// A `J x d` table of observed samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Matrix,
    column_names: Vec<String>,
    standardization: Option<Vec<ColumnScale>>,
}

impl DataMatrix {
    pub fn new(values: Matrix, column_names: Vec<String>) -> Result<Self> {
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::config("data must have at least one row and one column"));
        }
        if column_names.len() != values.cols() {
            return Err(Error::shape(format!(
                "{} column names for {} columns",
                column_names.len(),
                values.cols()
            )));
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            let (r, c) = (pos / values.cols(), pos % values.cols());
            return Err(Error::config(format!("non-finite value at row {r}, column {c}")));
        }
        Ok(Self { values, column_names, standardization: None })
    }

    /// Columns named `x0, x1, ...`.
    pub fn unnamed(values: Matrix) -> Result<Self> {
        let names = default_names("x", values.cols());
        Self::new(values, names)
    }

    pub fn with_standardization(mut self, scales: Vec<ColumnScale>) -> Result<Self> {
        if scales.len() != self.dims() {
            return Err(Error::shape("standardization record length differs from column count"));
        }
        self.standardization = Some(scales);
        Ok(self)
    }

    pub fn rows(&self) -> usize {
        self.values.rows()
    }

    pub fn dims(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn into_values(self) -> Matrix {
        self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn standardization(&self) -> Option<&[ColumnScale]> {
        self.standardization.as_deref()
    }

    /// Map standardized samples (e.g. generator output) back to raw units.
    pub fn unstandardize(&self, samples: &Matrix) -> Result<Matrix> {
        let Some(scales) = &self.standardization else {
            return Ok(samples.clone());
        };
        if samples.cols() != scales.len() {
            return Err(Error::shape("sample width differs from standardization record"));
        }
        let mut out = samples.clone();
        for i in 0..out.rows() {
            for (v, s) in out.row_mut(i).iter_mut().zip(scales) {
                *v = *v * s.std + s.mean;
            }
        }
        Ok(out)
    }

    fn select_columns(&self, keep: &[usize]) -> DataMatrix {
        DataMatrix {
            values: self.values.select_cols(keep),
            column_names: keep.iter().map(|&j| self.column_names[j].clone()).collect(),
            standardization: self.standardization.as_ref().map(|s| keep.iter().map(|&j| s[j]).collect()),
        }
    }
}

pub fn default_names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|j| format!("{prefix}{j}")).collect()
}

/// Population mean and standard deviation of a column.
pub fn column_stats(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, math::sqrt(var))
}

/// Subtract each column's mean and divide by its population standard deviation.
///
/// Standardizing an already standardized matrix composes the records so that
/// [`DataMatrix::unstandardize`] still returns the original units.
pub fn standardize(data: &DataMatrix) -> Result<DataMatrix> {
    let (rows, cols) = (data.rows(), data.dims());
    let mut scales = Vec::with_capacity(cols);
    for j in 0..cols {
        let (mean, std) = column_stats(&data.values.column(j));
        if !(std > 0.0) {
            return Err(Error::Preprocess(format!("column '{}' has zero variance", data.column_names[j])));
        }
        scales.push(ColumnScale { mean, std });
    }
    let mut values = data.values.clone();
    for i in 0..rows {
        for (v, s) in values.row_mut(i).iter_mut().zip(&scales) {
            *v = (*v - s.mean) / s.std;
        }
    }
    let record = match &data.standardization {
        None => scales,
        Some(prev) => prev
            .iter()
            .zip(&scales)
            .map(|(p, s)| ColumnScale { mean: p.mean + p.std * s.mean, std: p.std * s.std })
            .collect(),
    };
    Ok(DataMatrix { values, column_names: data.column_names.clone(), standardization: Some(record) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedDrop {
    pub kept: String,
    pub dropped: String,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub dropped_discrete: Vec<String>,
    pub dropped_correlated: Vec<CorrelatedDrop>,
    pub final_dims: usize,
    pub corr_threshold: f64,
    pub discrete_max_distinct: usize,
}

fn distinct_count(values: &[f64]) -> usize {
    values.iter().map(|v| v.to_bits()).collect::<BTreeSet<_>>().len()
}

/// Pearson correlation; 0 when either column is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = column_stats(a);
    let (mb, sb) = column_stats(b);
    if !(sa > 0.0 && sb > 0.0) {
        return 0.0;
    }
    let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / a.len() as f64;
    (cov / (sa * sb)).clamp(-1.0, 1.0)
}

/// Remove discrete-valued columns, then greedily remove correlated ones.
///
/// A column is discrete when it has at most `discrete_max_distinct` distinct
/// values. Correlated pairs are scanned left to right over the surviving columns;
/// when `|corr(i, j)| > corr_threshold` for `i < j`, column `j` is dropped.
pub fn prune_columns(
    data: &DataMatrix,
    corr_threshold: f64,
    discrete_max_distinct: usize,
) -> Result<(DataMatrix, PreprocessReport)> {
    if !(corr_threshold > 0.0 && corr_threshold <= 1.0) {
        return Err(Error::config(format!("corr_threshold must be in (0, 1], got {corr_threshold}")));
    }
    let columns: Vec<Vec<f64>> = (0..data.dims()).map(|j| data.values.column(j)).collect();
    let mut dropped_discrete = Vec::new();
    let mut candidates = Vec::new();
    for (j, col) in columns.iter().enumerate() {
        if distinct_count(col) <= discrete_max_distinct {
            dropped_discrete.push(data.column_names[j].clone());
        } else {
            candidates.push(j);
        }
    }
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped_correlated = Vec::new();
    for &j in &candidates {
        let offender = kept.iter().find_map(|&i| {
            let r = pearson(&columns[i], &columns[j]);
            (r.abs() > corr_threshold).then_some((i, r))
        });
        match offender {
            Some((i, r)) => dropped_correlated.push(CorrelatedDrop {
                kept: data.column_names[i].clone(),
                dropped: data.column_names[j].clone(),
                correlation: r,
            }),
            None => kept.push(j),
        }
    }
    if kept.is_empty() {
        return Err(Error::Preprocess("every column was removed".to_string()));
    }
    let report = PreprocessReport {
        dropped_discrete,
        dropped_correlated,
        final_dims: kept.len(),
        corr_threshold,
        discrete_max_distinct,
    };
    Ok((data.select_columns(&kept), report))
}

/// True when no column is discrete and no pair exceeds the threshold.
pub fn is_pruned(data: &DataMatrix, corr_threshold: f64, discrete_max_distinct: usize) -> bool {
    let columns: Vec<Vec<f64>> = (0..data.dims()).map(|j| data.values.column(j)).collect();
    columns.iter().all(|c| distinct_count(c) > discrete_max_distinct)
        && (0..columns.len()).all(|i| {
            (i + 1..columns.len()).all(|j| pearson(&columns[i], &columns[j]).abs() <= corr_threshold)
        })
}

/// The built-in two-dimensional toy distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyDataset {
    EightGaussians,
    TwoSpirals,
    Checkerboard,
    Rings,
    Moons,
    Swissroll,
    Pinwheel,
    Circles,
}

impl ToyDataset {
    pub const ALL: [ToyDataset; 8] = [
        ToyDataset::EightGaussians,
        ToyDataset::TwoSpirals,
        ToyDataset::Checkerboard,
        ToyDataset::Rings,
        ToyDataset::Moons,
        ToyDataset::Swissroll,
        ToyDataset::Pinwheel,
        ToyDataset::Circles,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ToyDataset::EightGaussians => "eight_gaussians",
            ToyDataset::TwoSpirals => "two_spirals",
            ToyDataset::Checkerboard => "checkerboard",
            ToyDataset::Rings => "rings",
            ToyDataset::Moons => "moons",
            ToyDataset::Swissroll => "swissroll",
            ToyDataset::Pinwheel => "pinwheel",
            ToyDataset::Circles => "circles",
        }
    }
}

impl fmt::Display for ToyDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyDataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyDataset::ALL.into_iter().find(|d| d.name() == s).ok_or_else(|| {
            let names: Vec<&str> = ToyDataset::ALL.iter().map(|d| d.name()).collect();
            Error::config(format!("unknown toy dataset '{s}' (expected one of {})", names.join(", ")))
        })
    }
}

pub const EIGHT_GAUSSIANS_RADIUS: f64 = 4.0;
pub const EIGHT_GAUSSIANS_STD: f64 = 0.5;
/// Side length of a checkerboard cell.
pub const CHECKER_CELL: f64 = 2.0;

/// Centers of the eight-Gaussians mixture, equally spaced on a circle.
pub fn eight_gaussians_centers() -> [[f64; 2]; 8] {
    core::array::from_fn(|k| {
        let a = k as f64 * PI / 4.0;
        [EIGHT_GAUSSIANS_RADIUS * math::cos(a), EIGHT_GAUSSIANS_RADIUS * math::sin(a)]
    })
}

/// Parity of the checkerboard cell containing `p`; every checkerboard sample has parity 0.
pub fn checkerboard_parity(p: [f64; 2]) -> i64 {
    let cx = math::floor(p[0] / CHECKER_CELL) as i64;
    let cy = math::floor(p[1] / CHECKER_CELL) as i64;
    (cx + cy).rem_euclid(2)
}

/// `n` samples of a toy distribution, bit-identical for a fixed `(dataset, n, seed)`.
pub fn generate_toy(dataset: ToyDataset, n: usize, seed: u64) -> Result<DataMatrix> {
    if n == 0 {
        return Err(Error::config("n must be >= 1"));
    }
    let mut rng = rng::stream(seed);
    let mut values = Matrix::zeros(n, 2);
    for i in 0..n {
        let p = toy_point(dataset, &mut rng);
        values.row_mut(i).copy_from_slice(&p);
    }
    DataMatrix::new(values, default_names("x", 2))
}

fn toy_point<R: Rng + ?Sized>(dataset: ToyDataset, rng: &mut R) -> [f64; 2] {
    match dataset {
        ToyDataset::EightGaussians => {
            let c = eight_gaussians_centers()[rng.random_range(0..8)];
            [
                c[0] + EIGHT_GAUSSIANS_STD * standard_normal(rng),
                c[1] + EIGHT_GAUSSIANS_STD * standard_normal(rng),
            ]
        }
        ToyDataset::TwoSpirals => {
            let u: f64 = rng.random();
            let r = math::sqrt(u) * 540.0 * TAU / 360.0;
            let mut x = -math::cos(r) * r + 0.5 * rng.random::<f64>();
            let mut y = math::sin(r) * r + 0.5 * rng.random::<f64>();
            if rng.random::<bool>() {
                x = -x;
                y = -y;
            }
            [x / 3.0 + 0.1 * standard_normal(rng), y / 3.0 + 0.1 * standard_normal(rng)]
        }
        ToyDataset::Checkerboard => {
            // square [-2, 2)^2 of unit cells, keeping cells with even floor(x)+floor(y)
            let x: f64 = rng.random::<f64>() * 4.0 - 2.0;
            let band = if rng.random::<bool>() { 0.0 } else { -2.0 };
            let fx = math::floor(x);
            let y = rng.random::<f64>() + band + (fx as i64).rem_euclid(2) as f64;
            [x * CHECKER_CELL, y * CHECKER_CELL]
        }
        ToyDataset::Rings => {
            const RADII: [f64; 4] = [3.0, 2.25, 1.5, 0.75];
            let r = RADII[rng.random_range(0..4)];
            let a = rng.random::<f64>() * TAU;
            [r * math::cos(a) + 0.08 * standard_normal(rng), r * math::sin(a) + 0.08 * standard_normal(rng)]
        }
        ToyDataset::Moons => {
            let a = rng.random::<f64>() * PI;
            let (x, y) = if rng.random::<bool>() {
                (math::cos(a), math::sin(a))
            } else {
                (1.0 - math::cos(a), 0.5 - math::sin(a))
            };
            let x = x + 0.1 * standard_normal(rng);
            let y = y + 0.1 * standard_normal(rng);
            [2.0 * x - 1.0, 2.0 * y - 0.2]
        }
        ToyDataset::Swissroll => {
            let t = 1.5 * PI * (1.0 + 2.0 * rng.random::<f64>());
            let x = t * math::cos(t) + standard_normal(rng);
            let y = t * math::sin(t) + standard_normal(rng);
            [x / 5.0, y / 5.0]
        }
        ToyDataset::Pinwheel => {
            const ARMS: usize = 5;
            const RADIAL_STD: f64 = 0.3;
            const TANGENTIAL_STD: f64 = 0.1;
            const RATE: f64 = 0.25;
            let arm = rng.random_range(0..ARMS);
            let r = 1.0 + RADIAL_STD * standard_normal(rng);
            let s = TANGENTIAL_STD * standard_normal(rng);
            let angle = arm as f64 * TAU / ARMS as f64 + RATE * math::exp(r);
            let (sa, ca) = (math::sin(angle), math::cos(angle));
            [2.0 * (r * ca - s * sa), 2.0 * (r * sa + s * ca)]
        }
        ToyDataset::Circles => {
            let r = if rng.random::<bool>() { 1.0 } else { 0.5 };
            let a = rng.random::<f64>() * TAU;
            let x = r * math::cos(a) + 0.08 * standard_normal(rng);
            let y = r * math::sin(a) + 0.08 * standard_normal(rng);
            [3.0 * x, 3.0 * y]
        }
    }
}
