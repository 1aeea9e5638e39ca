//! Response vector plus covariate matrix.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // needed without std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::quantile_sorted;

/// Quantile interval `(Q_q1, Q_q2)` of one predictor; split thresholds for
/// that predictor are drawn uniformly inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantileBounds {
    pub lower: f64,
    pub upper: f64,
}

impl QuantileBounds {
    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }

    /// A predictor with a zero-width interval cannot be split.
    pub fn is_splittable(&self) -> bool {
        self.range() > 0.0
    }

    pub fn contains_strictly(&self, t: f64) -> bool {
        t > self.lower && t < self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub y: Vec<f64>,
    /// Row-major `n × p` covariates.
    pub x: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub bounds: Vec<QuantileBounds>,
}

impl Dataset {
    /// Build a dataset and compute per-predictor `(q1, q2)` quantile bounds.
    pub fn new(y: Vec<f64>, x: Vec<f64>, p: usize, q1: f64, q2: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q1) || !(0.0..=1.0).contains(&q2) || q1 >= q2 {
            return Err(Error::Config(format!(
                "quantile levels must satisfy 0 <= q1 < q2 <= 1, got ({q1}, {q2})"
            )));
        }
        let n = y.len();
        Self::check_shape(&y, &x, p)?;
        let mut bounds = Vec::with_capacity(p);
        let mut col = Vec::with_capacity(n);
        for j in 0..p {
            col.clear();
            col.extend((0..n).map(|i| x[i * p + j]));
            col.sort_by(|a, b| a.total_cmp(b));
            let (lower, upper) = if n == 0 {
                (0.0, 0.0)
            } else {
                (quantile_sorted(&col, q1), quantile_sorted(&col, q2))
            };
            bounds.push(QuantileBounds { lower, upper });
        }
        Ok(Dataset { y, x, n, p, bounds })
    }

    /// Build a dataset with explicitly supplied bounds (e.g. those of a
    /// training set when scoring test data).
    pub fn with_bounds(
        y: Vec<f64>,
        x: Vec<f64>,
        p: usize,
        bounds: Vec<QuantileBounds>,
    ) -> Result<Self> {
        Self::check_shape(&y, &x, p)?;
        if bounds.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                found: bounds.len(),
            });
        }
        if let Some(b) = bounds.iter().find(|b| !(b.lower <= b.upper)) {
            return Err(Error::domain(format!(
                "quantile bounds out of order: ({}, {})",
                b.lower, b.upper
            )));
        }
        Ok(Dataset {
            n: y.len(),
            y,
            x,
            p,
            bounds,
        })
    }

    fn check_shape(y: &[f64], x: &[f64], p: usize) -> Result<()> {
        if x.len() != y.len() * p {
            return Err(Error::LengthMismatch {
                expected: y.len() * p,
                found: x.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!(
                "response {} is missing or non-finite",
                i + 1
            )));
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            let p = p.max(1);
            return Err(Error::domain(format!(
                "covariate at row {}, column {} is missing or non-finite",
                i / p + 1,
                i % p + 1
            )));
        }
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    /// Responses must be nonnegative integers for count likelihoods.
    pub fn check_counts(&self) -> Result<()> {
        match self.y.iter().position(|&v| v < 0.0 || v.fract() != 0.0) {
            Some(i) => Err(Error::domain(format!(
                "response {} = {} is not a nonnegative integer count",
                i + 1,
                self.y[i]
            ))),
            None => Ok(()),
        }
    }
}
