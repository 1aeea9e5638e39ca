//! Small numeric helpers shared by the samplers.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // needed without std
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};

/// Lower/upper clamp applied to Beta draws before taking `ln(1 - x)`.
pub const BETA_CLAMP: f64 = 1e-12;

/// `ln Σ exp(x)` with max-subtraction. Returns `-inf` for an empty slice or
/// when every term is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `ln Γ(x)` for `x > 0`.
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Clamp a stick variable into `[1e-12, 1 - 1e-12]`.
#[inline]
pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(BETA_CLAMP, 1.0 - BETA_CLAMP)
}

/// Draw an index with probability proportional to `exp(log_weights[i])`.
///
/// `scratch` is reused for the exponentiated weights so the hot loops of the
/// sampler do not allocate.
pub fn sample_log_categorical<R: Rng + ?Sized>(
    log_weights: &[f64],
    scratch: &mut Vec<f64>,
    rng: &mut R,
    step: &'static str,
) -> Result<usize> {
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() || max == f64::NEG_INFINITY {
        return Err(Error::numerical(
            step,
            format!("all {} conditional masses are zero", log_weights.len()),
        ));
    }
    if max == f64::INFINITY {
        return Err(Error::numerical(step, "infinite conditional mass"));
    }
    scratch.clear();
    let mut total = 0.0;
    for &lw in log_weights {
        let w = (lw - max).exp();
        if w.is_nan() {
            return Err(Error::numerical(step, "NaN conditional mass"));
        }
        total += w;
        scratch.push(total);
    }
    let u = rng.random::<f64>() * total;
    // First cumulative weight strictly above u; zero-mass entries are never
    // selected since their cumulative value equals the previous one.
    let idx = scratch.partition_point(|&c| c <= u);
    Ok(idx.min(log_weights.len() - 1))
}

/// Normalized probabilities from log weights.
pub fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(log_weights);
    log_weights.iter().map(|&lw| (lw - lse).exp()).collect()
}

/// Sample quantile with linear interpolation between order statistics
/// (the "type 7" rule). `sorted` must be ascending and nonempty.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Sort a copy of `values` and return the requested quantile.
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    quantile_sorted(&v, prob)
}
