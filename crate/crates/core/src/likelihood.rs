//! Response families and their conditional updates.
//!
//! * Gaussian: `y ~ N(θ_h, φ)` with `θ_h ~ N(m0, τ²)` and a shared
//!   `φ ~ InvGamma(e, f)`.
//! * Negative binomial: `f(y | r, p) = Γ(y+r)/(Γ(r) y!) p^r (1-p)^y`, mean
//!   `r(1-p)/p`, with `p_h ~ Uniform(0, 1)` and `r_h ~ Gamma(shape, rate)`.
//!   `p_h` has a Beta full conditional; `r_h` gets one random-walk
//!   Metropolis-Hastings step per sweep.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;
use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, Normal};

use crate::error::{Error, Result};
use crate::math::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Family {
    Gaussian,
    NegBin,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::NegBin => "negbin",
        }
    }
}

/// Parameters of one observational cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Atom {
    Normal { mean: f64 },
    NegBin { r: f64, p: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianPrior {
    pub m0: f64,
    pub tau2: f64,
    pub e: f64,
    pub f: f64,
}

impl Default for GaussianPrior {
    fn default() -> Self {
        GaussianPrior {
            m0: 0.0,
            tau2: 100.0,
            e: 1.0,
            f: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NegBinPrior {
    pub r_shape: f64,
    pub r_rate: f64,
    /// Half-width `r*` of the uniform random-walk proposal for `r_h`.
    pub r_window: f64,
}

impl Default for NegBinPrior {
    fn default() -> Self {
        NegBinPrior {
            r_shape: 1.0,
            r_rate: 1.0,
            r_window: 0.5,
        }
    }
}

/// Prior specification of the response family.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FamilyPrior {
    Gaussian(GaussianPrior),
    NegBin(NegBinPrior),
}

impl FamilyPrior {
    pub fn family(&self) -> Family {
        match self {
            FamilyPrior::Gaussian(_) => Family::Gaussian,
            FamilyPrior::NegBin(_) => Family::NegBin,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks: &[(&str, f64)] = match self {
            FamilyPrior::Gaussian(g) => &[("tau2", g.tau2), ("e", g.e), ("f", g.f)],
            FamilyPrior::NegBin(nb) => &[
                ("r_shape", nb.r_shape),
                ("r_rate", nb.r_rate),
                ("r_window", nb.r_window),
            ],
        };
        for (name, v) in checks {
            if !(*v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let FamilyPrior::Gaussian(g) = self {
            if !g.m0.is_finite() {
                return Err(Error::Config("m0 must be finite".into()));
            }
        }
        Ok(())
    }
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn gaussian_log_density(y: f64, mean: f64, var: f64) -> f64 {
    let z = y - mean;
    -0.5 * (LN_2PI + var.ln()) - 0.5 * z * z / var
}

/// Negative binomial log pmf; errors on a negative or fractional count.
pub fn negbin_log_pmf(y: f64, r: f64, p: f64) -> Result<f64> {
    if y < 0.0 || y.fract() != 0.0 || !y.is_finite() {
        return Err(Error::domain(format!(
            "{y} is not a nonnegative integer count"
        )));
    }
    if !(r > 0.0) || !(p > 0.0 && p <= 1.0) {
        return Err(Error::domain(format!(
            "invalid negative binomial parameters r={r}, p={p}"
        )));
    }
    Ok(negbin_log_pmf_unchecked(y, r, p))
}

#[inline]
fn negbin_log_pmf_unchecked(y: f64, r: f64, p: f64) -> f64 {
    let tail = if y == 0.0 { 0.0 } else { y * (1.0 - p).ln() };
    ln_gamma(y + r) - ln_gamma(r) - ln_gamma(y + 1.0) + r * p.ln() + tail
}

/// `ln f(y | atom, φ)`. `global` is the Gaussian variance and is ignored for
/// count atoms.
pub fn log_density(y: f64, atom: Atom, global: Option<f64>) -> Result<f64> {
    match atom {
        Atom::Normal { mean } => {
            let var = global.ok_or_else(|| Error::domain("Gaussian density needs a variance"))?;
            if !(var > 0.0) {
                return Err(Error::domain(format!(
                    "variance must be positive, got {var}"
                )));
            }
            if !y.is_finite() {
                return Err(Error::domain(format!("response {y} is not finite")));
            }
            Ok(gaussian_log_density(y, mean, var))
        }
        Atom::NegBin { r, p } => negbin_log_pmf(y, r, p),
    }
}

/// Mean of the response under `atom`.
pub fn mean_functional(atom: Atom, _global: Option<f64>) -> f64 {
    match atom {
        Atom::Normal { mean } => mean,
        Atom::NegBin { r, p } => r * (1.0 - p) / p,
    }
}

fn gamma_shape_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    Gamma::new(shape, 1.0 / rate)
        .map(|g| g.sample(rng))
        .map_err(|e| Error::numerical("gamma draw", format!("Gamma({shape}, {rate}): {e}")))
}

/// Draw from `InvGamma(shape, scale)`.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    Ok(1.0 / gamma_shape_rate(shape, scale, rng)?)
}

fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> Result<f64> {
    Beta::new(a, b)
        .map(|d| d.sample(rng))
        .map_err(|e| Error::numerical("beta draw", format!("Beta({a}, {b}): {e}")))
}

/// Conjugate posterior of a Gaussian atom: `(mean, variance)`.
pub fn gaussian_atom_posterior(prior: &GaussianPrior, phi: f64, n: usize, sum: f64) -> (f64, f64) {
    let v = 1.0 / (1.0 / prior.tau2 + n as f64 / phi);
    (v * (prior.m0 / prior.tau2 + sum / phi), v)
}

/// Beta parameters of the `p_h` full conditional.
pub fn negbin_p_posterior(r: f64, members: &[f64]) -> (f64, f64) {
    let sum: f64 = members.iter().sum();
    (1.0 + members.len() as f64 * r, 1.0 + sum)
}

/// Unnormalized log full conditional of `r_h` given `p_h`.
pub fn negbin_r_log_conditional(r: f64, p: f64, members: &[f64], prior: &NegBinPrior) -> f64 {
    if !(r > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut lp = (prior.r_shape - 1.0) * r.ln() - prior.r_rate * r;
    let n = members.len() as f64;
    lp += n * (r * p.ln() - ln_gamma(r));
    for &y in members {
        lp += ln_gamma(y + r);
    }
    lp
}

/// One random-walk MH update of `r` given `p`. Returns the new value and
/// whether the proposal was accepted; proposals at or below zero are
/// rejected outright.
pub fn negbin_r_mh_step<R: Rng + ?Sized>(
    r: f64,
    p: f64,
    members: &[f64],
    prior: &NegBinPrior,
    rng: &mut R,
) -> (f64, bool) {
    let proposal = r + prior.r_window * (2.0 * rng.random::<f64>() - 1.0);
    if proposal <= 0.0 {
        return (r, false);
    }
    let log_ratio = negbin_r_log_conditional(proposal, p, members, prior)
        - negbin_r_log_conditional(r, p, members, prior);
    if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
        (proposal, true)
    } else {
        (r, false)
    }
}

/// Gaussian response model state: prior, atoms and the shared variance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianModel {
    pub prior: GaussianPrior,
    pub atoms: Vec<f64>,
    pub phi: f64,
}

/// Negative binomial response model state.
#[derive(Debug, Clone, PartialEq)]
pub struct NegBinModel {
    pub prior: NegBinPrior,
    /// `(r_h, p_h)` per cluster.
    pub atoms: Vec<(f64, f64)>,
    pub r_proposals: u64,
    pub r_accepts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LikelihoodModel {
    Gaussian(GaussianModel),
    NegBin(NegBinModel),
}

impl LikelihoodModel {
    /// Atoms drawn from the base measure; `φ` starts at its prior mode
    /// `f / (e + 1)`.
    pub fn from_prior<R: Rng + ?Sized>(prior: &FamilyPrior, h: usize, rng: &mut R) -> Result<Self> {
        prior.validate()?;
        Ok(match prior {
            FamilyPrior::Gaussian(g) => {
                let normal = Normal::new(g.m0, g.tau2.sqrt())
                    .map_err(|e| Error::Config(format!("normal base measure: {e}")))?;
                LikelihoodModel::Gaussian(GaussianModel {
                    prior: *g,
                    atoms: (0..h).map(|_| normal.sample(rng)).collect(),
                    phi: g.f / (g.e + 1.0),
                })
            }
            FamilyPrior::NegBin(nb) => {
                let mut atoms = Vec::with_capacity(h);
                for _ in 0..h {
                    atoms.push(draw_negbin_base(nb, rng)?);
                }
                LikelihoodModel::NegBin(NegBinModel {
                    prior: *nb,
                    atoms,
                    r_proposals: 0,
                    r_accepts: 0,
                })
            }
        })
    }

    pub fn family(&self) -> Family {
        match self {
            LikelihoodModel::Gaussian(_) => Family::Gaussian,
            LikelihoodModel::NegBin(_) => Family::NegBin,
        }
    }

    pub fn num_atoms(&self) -> usize {
        match self {
            LikelihoodModel::Gaussian(m) => m.atoms.len(),
            LikelihoodModel::NegBin(m) => m.atoms.len(),
        }
    }

    pub fn atom(&self, h: usize) -> Atom {
        match self {
            LikelihoodModel::Gaussian(m) => Atom::Normal { mean: m.atoms[h] },
            LikelihoodModel::NegBin(m) => {
                let (r, p) = m.atoms[h];
                Atom::NegBin { r, p }
            }
        }
    }

    pub fn atoms(&self) -> Vec<Atom> {
        (0..self.num_atoms()).map(|h| self.atom(h)).collect()
    }

    pub fn global(&self) -> Option<f64> {
        match self {
            LikelihoodModel::Gaussian(m) => Some(m.phi),
            LikelihoodModel::NegBin(_) => None,
        }
    }

    /// Check that every response is in the family's support.
    pub fn check_support(&self, y: &[f64]) -> Result<()> {
        match self {
            LikelihoodModel::Gaussian(_) => Ok(()),
            LikelihoodModel::NegBin(_) => {
                for &v in y {
                    if v < 0.0 || v.fract() != 0.0 {
                        return Err(Error::domain(format!(
                            "{v} is not a nonnegative integer count"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Fill `out[h] = ln f(y | θ_h, φ)` for every cluster. Assumes `y` is in
    /// the support.
    #[inline]
    pub fn log_densities_into(&self, y: f64, out: &mut [f64]) {
        match self {
            LikelihoodModel::Gaussian(m) => {
                let c = -0.5 * (LN_2PI + m.phi.ln());
                let inv = 0.5 / m.phi;
                for (o, &mu) in out.iter_mut().zip(&m.atoms) {
                    let z = y - mu;
                    *o = c - z * z * inv;
                }
            }
            LikelihoodModel::NegBin(m) => {
                for (o, &(r, p)) in out.iter_mut().zip(&m.atoms) {
                    *o = negbin_log_pmf_unchecked(y, r, p);
                }
            }
        }
    }

    /// Draw atom `h` from its full conditional given the responses currently
    /// assigned to it; an empty cluster is redrawn from the base measure.
    pub fn sample_atom_posterior<R: Rng + ?Sized>(
        &mut self,
        h: usize,
        members: &[f64],
        rng: &mut R,
    ) -> Result<()> {
        match self {
            LikelihoodModel::Gaussian(m) => {
                let sum: f64 = members.iter().sum();
                let (mean, var) = gaussian_atom_posterior(&m.prior, m.phi, members.len(), sum);
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                let draw = mean + var.sqrt() * z;
                if !draw.is_finite() {
                    return Err(Error::numerical(
                        "atom update",
                        format!("non-finite mean for cluster {}", h + 1),
                    ));
                }
                m.atoms[h] = draw;
            }
            LikelihoodModel::NegBin(m) => {
                if members.is_empty() {
                    m.atoms[h] = draw_negbin_base(&m.prior, rng)?;
                    return Ok(());
                }
                let (r, _) = m.atoms[h];
                let (a, b) = negbin_p_posterior(r, members);
                // Keep p strictly inside (0, 1) so ln p and ln(1 - p) stay finite.
                let p = beta_draw(a, b, rng)?.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
                let (r_new, accepted) = negbin_r_mh_step(r, p, members, &m.prior, rng);
                m.r_proposals += 1;
                m.r_accepts += accepted as u64;
                m.atoms[h] = (r_new, p);
            }
        }
        Ok(())
    }

    /// Update the shared variance `φ ~ InvGamma(e + n/2, f + Σ(y_i - θ_{C_i})²/2)`.
    /// A no-op for count families.
    pub fn sample_global<R: Rng + ?Sized>(
        &mut self,
        y: &[f64],
        c: &[u32],
        rng: &mut R,
    ) -> Result<()> {
        if let LikelihoodModel::Gaussian(m) = self {
            let (shape, scale) = inv_gamma_posterior(&m.prior, y, c, &m.atoms);
            let phi = sample_inv_gamma(shape, scale, rng)?;
            if !(phi > 0.0 && phi.is_finite()) {
                return Err(Error::numerical(
                    "global update",
                    format!("variance draw {phi}"),
                ));
            }
            m.phi = phi;
        }
        Ok(())
    }

    /// Restore a model from stored atoms (e.g. a trace record).
    pub fn from_atoms(prior: &FamilyPrior, atoms: &[Atom], global: Option<f64>) -> Result<Self> {
        match prior {
            FamilyPrior::Gaussian(g) => {
                let phi = global.ok_or_else(|| Error::domain("Gaussian model needs a variance"))?;
                let means = atoms
                    .iter()
                    .map(|a| match a {
                        Atom::Normal { mean } => Ok(*mean),
                        _ => Err(Error::domain("expected Gaussian atoms")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(LikelihoodModel::Gaussian(GaussianModel {
                    prior: *g,
                    atoms: means,
                    phi,
                }))
            }
            FamilyPrior::NegBin(nb) => {
                let pairs = atoms
                    .iter()
                    .map(|a| match a {
                        Atom::NegBin { r, p } => Ok((*r, *p)),
                        _ => Err(Error::domain("expected negative binomial atoms")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(LikelihoodModel::NegBin(NegBinModel {
                    prior: *nb,
                    atoms: pairs,
                    r_proposals: 0,
                    r_accepts: 0,
                }))
            }
        }
    }
}

/// Shape and scale of the `φ` full conditional.
pub fn inv_gamma_posterior(
    prior: &GaussianPrior,
    y: &[f64],
    c: &[u32],
    atoms: &[f64],
) -> (f64, f64) {
    let ss: f64 = y
        .iter()
        .zip(c)
        .map(|(&yi, &ci)| {
            let z = yi - atoms[ci as usize];
            z * z
        })
        .sum();
    (prior.e + y.len() as f64 / 2.0, prior.f + ss / 2.0)
}

fn draw_negbin_base<R: Rng + ?Sized>(prior: &NegBinPrior, rng: &mut R) -> Result<(f64, f64)> {
    let r = gamma_shape_rate(prior.r_shape, prior.r_rate, rng)?.max(f64::MIN_POSITIVE);
    let p: f64 = rng.sample(rand::distr::Open01);
    Ok((r, p))
}
