//! Truncated stick-breaking weights and the latent state they belong to.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01};

use crate::error::{Error, Result};
use crate::math::clamp_unit;

/// Tolerance used when checking that weight vectors are normalized.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Gamma priors on the two concentrations: `alpha ~ Gamma(a, b)` and
/// `beta ~ Gamma(c, d)` (shape, rate).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparameters {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            a: 2.0,
            b: 1.5,
            c: 1.5,
            d: 2.0,
        }
    }
}

impl Hyperparameters {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let h = Hyperparameters { a, b, c, d };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("a", self.a), ("b", self.b), ("c", self.c), ("d", self.d)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    pub fn alpha_prior_mean(&self) -> f64 {
        self.a / self.b
    }

    pub fn beta_prior_mean(&self) -> f64 {
        self.c / self.d
    }
}

/// Truncation of the two stick-breaking sums: at most `k` distributional
/// clusters and `h` observational clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TruncationLevels {
    pub k: usize,
    pub h: usize,
}

impl Default for TruncationLevels {
    fn default() -> Self {
        TruncationLevels { k: 12, h: 30 }
    }
}

impl TruncationLevels {
    pub fn new(k: usize, h: usize) -> Result<Self> {
        let t = TruncationLevels { k, h };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.h < 2 {
            return Err(Error::Config(format!(
                "truncation levels must be at least 2 (K={}, H={})",
                self.k, self.h
            )));
        }
        Ok(())
    }
}

/// Map stick proportions to weights: `w_h = q_h Π_{s<h} (1 - q_s)`, with the
/// final weight set to `1 - Σ_{s<last} w_s` (clamped at 0) so the result
/// sums to one.
pub fn stick_break(q_row: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; q_row.len()];
    stick_break_into(q_row, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`stick_break`].
pub fn stick_break_into(q_row: &[f64], out: &mut [f64]) -> Result<()> {
    let Some(&last) = q_row.last() else {
        return Err(Error::Empty("stick row".into()));
    };
    if out.len() != q_row.len() {
        return Err(Error::LengthMismatch {
            expected: q_row.len(),
            found: out.len(),
        });
    }
    if let Some(bad) = q_row.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::domain(format!(
            "stick variable {bad} outside [0, 1]"
        )));
    }
    if last != 1.0 {
        return Err(Error::Truncation(format!(
            "final stick variable must be exactly 1, got {last}"
        )));
    }
    let n = q_row.len();
    let mut remaining = 1.0;
    let mut partial = 0.0;
    for (w, &q) in out[..n - 1].iter_mut().zip(&q_row[..n - 1]) {
        *w = q * remaining;
        remaining *= 1.0 - q;
        partial += *w;
    }
    out[n - 1] = (1.0 - partial).max(0.0);
    Ok(())
}

/// `ln G` for `G ~ Gamma(shape, 1)`, exact even when `G` would underflow.
fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> Result<f64> {
    let boosted = if shape >= 1.0 { shape } else { shape + 1.0 };
    let g = Gamma::new(boosted, 1.0)
        .map_err(|e| Error::domain(format!("Gamma({boosted}, 1): {e}")))?
        .sample(rng)
        .ln();
    if shape >= 1.0 {
        Ok(g)
    } else {
        // Gamma(a) = Gamma(a + 1) U^{1/a}.
        let u: f64 = Open01.sample(rng);
        Ok(g + u.ln() / shape)
    }
}

/// Draw `x ~ Beta(a, b)` together with `ln(1 - x)` computed without
/// cancellation, so values of `x` that round to 1 keep their exact log
/// complement.
pub fn sample_beta_log1m<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<(f64, f64)> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::domain(format!(
            "Beta({a}, {b}) parameters must be positive"
        )));
    }
    let lx = ln_gamma_variate(a, rng)?;
    let ly = ln_gamma_variate(b, rng)?;
    let m = lx.max(ly);
    let ls = m + ((lx - m).exp() + (ly - m).exp()).ln();
    Ok(((lx - ls).exp(), ly - ls))
}

/// `length` stick variables from the prior: the first `length - 1` are
/// `Beta(1, concentration)` draws and the last is pinned to 1.
pub fn sample_sticks_prior<R: Rng + ?Sized>(
    concentration: f64,
    length: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    Ok(sample_sticks_prior_log1m(concentration, length, rng)?.0)
}

/// [`sample_sticks_prior`] plus `ln(1 - x)` for every stick.
pub fn sample_sticks_prior_log1m<R: Rng + ?Sized>(
    concentration: f64,
    length: usize,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(concentration > 0.0 && concentration.is_finite()) {
        return Err(Error::domain(format!(
            "concentration must be positive, got {concentration}"
        )));
    }
    if length == 0 {
        return Err(Error::domain("stick length must be at least 1"));
    }
    let mut x = Vec::with_capacity(length);
    let mut l = Vec::with_capacity(length);
    for _ in 0..length - 1 {
        let (v, lv) = sample_beta_log1m(1.0, concentration, rng)?;
        x.push(v);
        l.push(lv);
    }
    x.push(1.0);
    l.push(f64::NEG_INFINITY);
    Ok((x, l))
}

/// Stick proportions `U` (length K) and `q` (K × H, row-major), each with
/// its log complement `ln(1 - x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StickVariables {
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub log1m_u: Vec<f64>,
    pub log1m_q: Vec<f64>,
    pub k: usize,
    pub h: usize,
}

impl StickVariables {
    pub fn sample_prior<R: Rng + ?Sized>(
        trunc: TruncationLevels,
        alpha: f64,
        beta: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let (u, log1m_u) = sample_sticks_prior_log1m(alpha, trunc.k, rng)?;
        let mut q = Vec::with_capacity(trunc.k * trunc.h);
        let mut log1m_q = Vec::with_capacity(trunc.k * trunc.h);
        for _ in 0..trunc.k {
            let (row, lrow) = sample_sticks_prior_log1m(beta, trunc.h, rng)?;
            q.extend(row);
            log1m_q.extend(lrow);
        }
        Ok(StickVariables {
            u,
            q,
            log1m_u,
            log1m_q,
            k: trunc.k,
            h: trunc.h,
        })
    }

    /// From raw values. Log complements are taken after clamping to
    /// `[1e-12, 1 - 1e-12]`, except for the pinned final sticks.
    pub fn from_values(u: Vec<f64>, q: Vec<f64>, k: usize, h: usize) -> Self {
        let l = |v: &Vec<f64>, len: usize| -> Vec<f64> {
            v.iter()
                .enumerate()
                .map(|(i, &x)| {
                    if i % len == len - 1 {
                        f64::NEG_INFINITY
                    } else {
                        libm::log1p(-clamp_unit(x))
                    }
                })
                .collect()
        };
        StickVariables {
            log1m_u: l(&u, k),
            log1m_q: l(&q, h),
            u,
            q,
            k,
            h,
        }
    }

    pub fn q_row(&self, k: usize) -> &[f64] {
        &self.q[k * self.h..(k + 1) * self.h]
    }
}

/// Weights `rho` (length K) and `nu` (K × H, row-major) derived from the sticks.
#[derive(Debug, Clone, PartialEq)]
pub struct StickWeights {
    pub rho: Vec<f64>,
    pub nu: Vec<f64>,
    pub k: usize,
    pub h: usize,
}

impl StickWeights {
    pub fn from_sticks(sticks: &StickVariables) -> Result<Self> {
        let mut w = StickWeights {
            rho: vec![0.0; sticks.k],
            nu: vec![0.0; sticks.k * sticks.h],
            k: sticks.k,
            h: sticks.h,
        };
        w.refresh(sticks)?;
        Ok(w)
    }

    /// Recompute in place from `sticks`.
    pub fn refresh(&mut self, sticks: &StickVariables) -> Result<()> {
        stick_break_into(&sticks.u, &mut self.rho)?;
        for k in 0..sticks.k {
            let h = sticks.h;
            stick_break_into(sticks.q_row(k), &mut self.nu[k * h..(k + 1) * h])?;
        }
        Ok(())
    }

    pub fn nu_row(&self, k: usize) -> &[f64] {
        &self.nu[k * self.h..(k + 1) * self.h]
    }
}

/// Every per-chain latent quantity except the tree and the atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    /// Observational cluster of each observation.
    pub c: Vec<u32>,
    /// Distributional cluster of each predictor group (one per leaf label).
    pub d: Vec<u32>,
    pub sticks: StickVariables,
    pub weights: StickWeights,
    pub alpha: f64,
    pub beta: f64,
}

/// One violated invariant reported by [`validate_state`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    LabelOutOfRange {
        which: &'static str,
        index: usize,
        label: u32,
        bound: usize,
    },
    StickOutOfRange {
        which: &'static str,
        index: usize,
        value: f64,
    },
    StickNotPinned {
        which: &'static str,
        row: usize,
        value: f64,
    },
    NotNormalized {
        which: &'static str,
        row: usize,
        sum: f64,
    },
    WeightOutOfRange {
        which: &'static str,
        index: usize,
        value: f64,
    },
    InconsistentWithSticks {
        which: &'static str,
        index: usize,
    },
    ShapeMismatch(String),
    NonPositiveConcentration {
        which: &'static str,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LabelOutOfRange {
                which,
                index,
                label,
                bound,
            } => write!(
                f,
                "label-out-of-range: {which}[{index}] = {} exceeds {bound}",
                label + 1
            ),
            Violation::StickOutOfRange {
                which,
                index,
                value,
            } => {
                write!(f, "stick-out-of-range: {which}[{index}] = {value}")
            }
            Violation::StickNotPinned { which, row, value } => {
                write!(f, "stick-not-pinned: last {which} of row {row} is {value}")
            }
            Violation::NotNormalized { which, row, sum } => {
                write!(f, "normalization failure: {which} row {row} sums to {sum}")
            }
            Violation::WeightOutOfRange {
                which,
                index,
                value,
            } => {
                write!(f, "weight-out-of-range: {which}[{index}] = {value}")
            }
            Violation::InconsistentWithSticks { which, index } => {
                write!(
                    f,
                    "weights-inconsistent: {which}[{index}] does not match its sticks"
                )
            }
            Violation::ShapeMismatch(s) => write!(f, "shape mismatch: {s}"),
            Violation::NonPositiveConcentration { which, value } => {
                write!(f, "nonpositive concentration: {which} = {value}")
            }
        }
    }
}

/// Check every structural invariant of `state`. Never mutates; an empty
/// vector means the state is valid.
pub fn validate_state(state: &LatentState, trunc: TruncationLevels) -> Vec<Violation> {
    let mut out = Vec::new();
    let (kk, hh) = (trunc.k, trunc.h);

    for (i, &c) in state.c.iter().enumerate() {
        if c as usize >= hh {
            out.push(Violation::LabelOutOfRange {
                which: "C",
                index: i,
                label: c,
                bound: hh,
            });
        }
    }
    for (g, &d) in state.d.iter().enumerate() {
        if d as usize >= kk {
            out.push(Violation::LabelOutOfRange {
                which: "D",
                index: g,
                label: d,
                bound: kk,
            });
        }
    }

    let s = &state.sticks;
    let w = &state.weights;
    if s.u.len() != kk || s.q.len() != kk * hh || w.rho.len() != kk || w.nu.len() != kk * hh {
        out.push(Violation::ShapeMismatch(format!(
            "expected K={kk}, H={hh}; got |U|={}, |q|={}, |rho|={}, |nu|={}",
            s.u.len(),
            s.q.len(),
            w.rho.len(),
            w.nu.len()
        )));
        return out;
    }

    for (i, &u) in s.u.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            out.push(Violation::StickOutOfRange {
                which: "U",
                index: i,
                value: u,
            });
        }
    }
    for (i, &q) in s.q.iter().enumerate() {
        if !(0.0..=1.0).contains(&q) {
            out.push(Violation::StickOutOfRange {
                which: "q",
                index: i,
                value: q,
            });
        }
    }
    if s.u[kk - 1] != 1.0 {
        out.push(Violation::StickNotPinned {
            which: "U",
            row: 0,
            value: s.u[kk - 1],
        });
    }
    for k in 0..kk {
        let last = s.q[k * hh + hh - 1];
        if last != 1.0 {
            out.push(Violation::StickNotPinned {
                which: "q",
                row: k,
                value: last,
            });
        }
    }

    check_row(&mut out, "rho", 0, &w.rho);
    for k in 0..kk {
        check_row(&mut out, "nu", k, &w.nu[k * hh..(k + 1) * hh]);
    }

    // Consistency with the stick-breaking map, only meaningful when the
    // sticks themselves are valid.
    if let Ok(rho) = stick_break(&s.u) {
        for (i, (a, b)) in rho.iter().zip(&w.rho).enumerate() {
            if (a - b).abs() > NORMALIZATION_TOL {
                out.push(Violation::InconsistentWithSticks {
                    which: "rho",
                    index: i,
                });
                break;
            }
        }
    }
    for k in 0..kk {
        if let Ok(nu) = stick_break(s.q_row(k)) {
            let row = &w.nu[k * hh..(k + 1) * hh];
            if let Some(h) = nu
                .iter()
                .zip(row)
                .position(|(a, b)| (a - b).abs() > NORMALIZATION_TOL)
            {
                out.push(Violation::InconsistentWithSticks {
                    which: "nu",
                    index: k * hh + h,
                });
            }
        }
    }

    for (which, v) in [("alpha", state.alpha), ("beta", state.beta)] {
        if !(v > 0.0) {
            out.push(Violation::NonPositiveConcentration { which, value: v });
        }
    }
    out
}

fn check_row(out: &mut Vec<Violation>, which: &'static str, row: usize, values: &[f64]) {
    for (i, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            out.push(Violation::WeightOutOfRange {
                which,
                index: row * values.len() + i,
                value: v,
            });
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        out.push(Violation::NotNormalized { which, row, sum });
    }
}
