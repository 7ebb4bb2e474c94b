//! Hot loops for ensemble score evaluation.
//!
//! A mini-batch is shared by every trajectory in an ensemble step, so it is laid
//! out once per step as `d` contiguous columns. Each query then runs a handful of
//! linear passes over length-`N` buffers that the compiler can vectorize. Sums use
//! eight fixed accumulator lanes, which keeps the reduction order (and therefore
//! the result) independent of how the work is scheduled.

use alloc::vec;
use alloc::vec::Vec;

use crate::matrix::Matrix;

const LANES: usize = 8;

// 1.5 * 2^52: adding it rounds to the nearest integer and leaves that integer in
// the low mantissa bits.
const ROUND_SHIFT: f64 = 6_755_399_441_055_744.0;
const UNDERFLOW: f64 = -1021.0;

/// `2^y` for `y <= 0`, branch-free so it vectorizes. Returns exactly 0 below -1021.
#[inline(always)]
pub(crate) fn exp2_nonpositive(y: f64) -> f64 {
    let yc = if y < UNDERFLOW { UNDERFLOW } else { y };
    let shifted = yc + ROUND_SHIFT;
    let k = shifted - ROUND_SHIFT;
    let f = yc - k;
    // degree-10 Chebyshev fit of 2^f on |f| <= 1/2, max error 2.2e-16
    let mut p = 7.072_585_949_269_223e-9;
    p = p * f + 1.020_869_029_995_830_6e-7;
    p = p * f + 1.321_544_258_792_169e-6;
    p = p * f + 1.525_265_726_020_083_7e-5;
    p = p * f + 1.540_353_044_173_605e-4;
    p = p * f + 1.333_355_823_016_497_4e-3;
    p = p * f + 9.618_129_107_606_888e-3;
    p = p * f + 5.550_410_866_444_772e-2;
    p = p * f + 2.402_265_069_591_009_7e-1;
    p = p * f + 6.931_471_805_599_5e-1;
    p = p * f + 1.0;
    // low 12 bits of the shifted mantissa hold k + 2^51; rebias to k + 1023
    let bias = 1023u64.wrapping_sub(1u64 << 51);
    let scale = f64::from_bits(shifted.to_bits().wrapping_add(bias) << 52);
    if y < UNDERFLOW {
        0.0
    } else {
        p * scale
    }
}

#[inline(always)]
fn lane_sum(acc: [f64; LANES]) -> f64 {
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]))
}

#[inline(always)]
pub(crate) fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0; LANES];
    let chunks = a.chunks_exact(LANES);
    let tail = chunks.remainder();
    for c in chunks {
        for l in 0..LANES {
            acc[l] += c[l];
        }
    }
    lane_sum(acc) + tail.iter().sum::<f64>()
}

#[inline(always)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0; LANES];
    let ca = a.chunks_exact(LANES);
    let cb = b.chunks_exact(LANES);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..LANES {
            acc[l] += x[l] * y[l];
        }
    }
    lane_sum(acc) + tail
}

/// `dist[i] = f(dist[i], (z - col[i])^2)`, returning the new minimum.
#[inline(always)]
fn min_update(dist: &mut [f64], col: &[f64], z: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut lo = [f64::INFINITY; LANES];
    let mut dc = dist.chunks_exact_mut(LANES);
    let mut cc = col.chunks_exact(LANES);
    for (dv, cv) in (&mut dc).zip(&mut cc) {
        for l in 0..LANES {
            let diff = z - cv[l];
            let v = f(dv[l], diff * diff);
            dv[l] = v;
            lo[l] = if v < lo[l] { v } else { lo[l] };
        }
    }
    let mut closest = lo.iter().fold(f64::INFINITY, |m, &v| if v < m { v } else { m });
    for (dv, &cv) in dc.into_remainder().iter_mut().zip(cc.remainder()) {
        let diff = z - cv;
        *dv = f(*dv, diff * diff);
        closest = if *dv < closest { *dv } else { closest };
    }
    closest
}

/// A mini-batch laid out for posterior-mean queries at one fixed time.
pub(crate) struct PreparedBatch {
    n: usize,
    d: usize,
    /// column-major `x`, `d` columns of length `n`
    cols: Vec<f64>,
    /// column-major `alpha_t * x`
    scaled: Vec<f64>,
    /// `-log2(e) / (2 beta_t^2)`, so weights are `2^(precision * dist)`
    precision: f64,
}

impl PreparedBatch {
    pub(crate) fn new(batch: &Matrix, alpha: f64, beta_sq: f64) -> Self {
        let (n, d) = (batch.rows(), batch.cols());
        let mut cols = vec![0.0; n * d];
        for (i, row) in batch.iter_rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                cols[j * n + i] = v;
            }
        }
        let scaled = cols.iter().map(|v| alpha * v).collect();
        Self { n, d, cols, scaled, precision: -core::f64::consts::LOG2_E * 0.5 / beta_sq }
    }

    pub(crate) fn len(&self) -> usize {
        self.n
    }

    /// Softmax-weighted batch mean for query `z`. `scratch` must hold `n` values.
    ///
    /// Uses the widest vector unit the CPU offers. Every variant runs the same
    /// scalar code (no fused multiply-add), so results are bit-identical.
    pub(crate) fn posterior_mean(&self, z: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        #[cfg(all(feature = "std", target_arch = "x86_64"))]
        {
            if std::is_x86_feature_detected!("avx512f") {
                // SAFETY: the feature was just detected.
                return unsafe { self.posterior_mean_avx512(z, scratch, out) };
            }
            if std::is_x86_feature_detected!("avx2") {
                // SAFETY: as above.
                return unsafe { self.posterior_mean_avx2(z, scratch, out) };
            }
        }
        self.posterior_mean_generic(z, scratch, out)
    }

    #[cfg(all(feature = "std", target_arch = "x86_64"))]
    #[target_feature(enable = "avx512f")]
    unsafe fn posterior_mean_avx512(&self, z: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.posterior_mean_generic(z, scratch, out)
    }

    #[cfg(all(feature = "std", target_arch = "x86_64"))]
    #[target_feature(enable = "avx2")]
    unsafe fn posterior_mean_avx2(&self, z: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        self.posterior_mean_generic(z, scratch, out)
    }

    #[inline(always)]
    fn posterior_mean_generic(&self, z: &[f64], scratch: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.d);
        let n = self.n;
        let dist = &mut scratch[..n];
        let (last, rest) = z.split_last().expect("at least one dimension");
        for (j, &zj) in rest.iter().enumerate() {
            let col = &self.scaled[j * n..(j + 1) * n];
            if j == 0 {
                for (acc, &c) in dist.iter_mut().zip(col) {
                    let diff = zj - c;
                    *acc = diff * diff;
                }
            } else {
                for (acc, &c) in dist.iter_mut().zip(col) {
                    let diff = zj - c;
                    *acc += diff * diff;
                }
            }
        }
        // last dimension fused with the running minimum
        let col = &self.scaled[rest.len() * n..];
        let closest = if rest.is_empty() {
            min_update(dist, col, *last, |_, sq| sq)
        } else {
            min_update(dist, col, *last, |old, sq| old + sq)
        };

        let c = self.precision;
        for v in dist.iter_mut() {
            *v = exp2_nonpositive(c * (*v - closest));
        }
        if self.d == 1 {
            // total and weighted sum in one pass
            let mut tot = [0.0; LANES];
            let mut acc = [0.0; LANES];
            let mut wc = dist.chunks_exact(LANES);
            let mut xc = self.cols.chunks_exact(LANES);
            for (wv, xv) in (&mut wc).zip(&mut xc) {
                for l in 0..LANES {
                    tot[l] += wv[l];
                    acc[l] += wv[l] * xv[l];
                }
            }
            let (mut total, mut weighted) = (lane_sum(tot), lane_sum(acc));
            for (&w, &x) in wc.remainder().iter().zip(xc.remainder()) {
                total += w;
                weighted += w * x;
            }
            out[0] = weighted / total;
            return;
        }
        let total = sum(dist);
        for (j, o) in out.iter_mut().enumerate() {
            *o = dot(dist, &self.cols[j * n..(j + 1) * n]) / total;
        }
    }
}
