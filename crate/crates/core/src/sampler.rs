//! Block Gibbs / Metropolis-Hastings sampler.
//!
//! One sweep runs, in order: the tree MH step with `D` marginalized out
//! (followed by a fresh draw of every `D_g` when the proposal is accepted),
//! the `D` update, the `C` update, the `U` and `q` sticks, the atoms, the
//! global parameter and finally the two concentrations.
//!
//! The same engine drives the fixed-group and DP baselines by swapping the
//! [`Structure`] that maps observations to groups.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::baselines::FixedGrouping;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{Atom, Family, FamilyPrior, LikelihoodModel};
use crate::math::{log_sum_exp, sample_log_categorical};
use crate::sticks::{
    sample_beta_log1m, Hyperparameters, LatentState, StickVariables, StickWeights, TruncationLevels,
};
use crate::tree::{
    propose_move, sample_tree_prior, tree_log_prior, GroupCounts, MoveKind, PyramidTree, TreeConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Method {
    Capgm,
    Cam,
    Dp,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Capgm => "capgm",
            Method::Cam => "cam",
            Method::Dp => "dp",
        }
    }
}

/// How observations are mapped to predictor groups.
#[derive(Debug, Clone, PartialEq)]
pub enum Structure {
    /// Groups are the leaves of a pyramid tree updated by MH.
    Pyramid(TreeConfig),
    /// Known, fixed groups (common atoms model).
    Fixed(FixedGrouping),
    /// One group and one distributional cluster (truncated DP mixture).
    Single,
}

impl Structure {
    pub fn method(&self) -> Method {
        match self {
            Structure::Pyramid(_) => Method::Capgm,
            Structure::Fixed(_) => Method::Cam,
            Structure::Single => Method::Dp,
        }
    }
}

/// Everything that defines the model being sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub structure: Structure,
    pub family: FamilyPrior,
    pub trunc: TruncationLevels,
    pub hyper: Hyperparameters,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        self.family.validate()?;
        self.hyper.validate()?;
        match &self.structure {
            Structure::Single => {
                if self.trunc.h < 2 {
                    return Err(Error::Config("H must be at least 2".into()));
                }
            }
            Structure::Pyramid(cfg) => {
                cfg.validate()?;
                self.trunc.validate()?;
            }
            Structure::Fixed(g) => {
                g.validate()?;
                self.trunc.validate()?;
            }
        }
        Ok(())
    }

    /// Number of distributional clusters actually sampled (1 for the DP).
    pub fn effective_k(&self) -> usize {
        match self.structure {
            Structure::Single => 1,
            _ => self.trunc.k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplerConfig {
    /// Total sweeps including burn-in.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub chains: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            iterations: 10_000,
            burn_in: 5_000,
            thin: 1,
            seed: 1,
            chains: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("chains must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }

    /// Number of recorded draws per chain.
    pub fn kept(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }

    fn keeps(&self, it: usize) -> bool {
        it >= self.burn_in && (it - self.burn_in).is_multiple_of(self.thin)
    }
}

/// One recorded draw.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Observational cluster per observation.
    pub c: Vec<u32>,
    /// Predictor group per observation.
    pub groups: Vec<u32>,
    /// Distributional cluster per group label.
    pub d: Vec<u32>,
    pub tree: PyramidTree,
    pub atoms: Vec<Atom>,
    pub global: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub rho: Vec<f64>,
    /// Row-major `K × H`.
    pub nu: Vec<f64>,
    pub log_likelihood: f64,
}

impl IterationRecord {
    pub fn h(&self) -> usize {
        self.atoms.len()
    }

    pub fn nu_row(&self, k: usize) -> &[f64] {
        let h = self.h();
        &self.nu[k * h..(k + 1) * h]
    }

    /// Distributional cluster of observation `i`.
    pub fn dc_of(&self, i: usize) -> u32 {
        self.d[self.groups[i] as usize]
    }

    pub fn dc_labels(&self) -> Vec<u32> {
        self.groups.iter().map(|&g| self.d[g as usize]).collect()
    }
}

/// Tree-move bookkeeping, indexed by [`MoveKind`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoveStats {
    pub proposed: [u64; 4],
    pub accepted: [u64; 4],
    pub auto_rejected: [u64; 4],
}

impl MoveStats {
    pub fn acceptance_rate(&self, kind: MoveKind) -> f64 {
        let i = kind as usize;
        if self.proposed[i] == 0 {
            0.0
        } else {
            self.accepted[i] as f64 / self.proposed[i] as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    pub method: Method,
    pub family: Family,
    pub chain_index: u64,
    pub k: usize,
    pub h: usize,
    pub records: Vec<IterationRecord>,
    pub move_stats: MoveStats,
    /// `(proposed, accepted)` for the negative binomial `r_h` updates.
    pub r_moves: Option<(u64, u64)>,
}

/// `ln Π_g Σ_k ρ_k Π_h ν_kh^{n_gh}`, the tree likelihood with `D`
/// marginalized out. Empty groups contribute `ln Σ_k ρ_k = 0`.
///
/// Per-group terms are summed in sorted order so that relabeling the groups
/// gives a bit-identical result.
pub fn marginal_tree_loglik(counts: &GroupCounts, rho: &[f64], nu: &[f64]) -> Result<f64> {
    let h = counts.h;
    if nu.len() != rho.len() * h {
        return Err(Error::LengthMismatch {
            expected: rho.len() * h,
            found: nu.len(),
        });
    }
    if let Some(bad) = rho.iter().chain(nu).find(|w| !(**w >= 0.0)) {
        return Err(Error::domain(format!("negative or NaN weight {bad}")));
    }
    let ln_rho: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let ln_nu: Vec<f64> = nu.iter().map(|v| v.ln()).collect();
    let mut terms = Vec::with_capacity(counts.nonempty.len());
    let mut buf = vec![0.0; rho.len()];
    for &g in &counts.nonempty {
        group_log_weights(counts.row(g as usize), &ln_rho, &ln_nu, &mut buf);
        terms.push(log_sum_exp(&buf));
    }
    terms.sort_by(|a, b| a.total_cmp(b));
    Ok(terms.iter().sum())
}

/// `out[k] = ln ρ_k + Σ_h n_h ln ν_kh`, skipping zero counts (`0 ln 0 = 0`).
fn group_log_weights(row: &[u32], ln_rho: &[f64], ln_nu: &[f64], out: &mut [f64]) {
    let h = row.len();
    for (k, o) in out.iter_mut().enumerate() {
        let ln_nu_k = &ln_nu[k * h..(k + 1) * h];
        let mut acc = ln_rho[k];
        for (&n, &lv) in row.iter().zip(ln_nu_k) {
            if n > 0 {
                acc += n as f64 * lv;
            }
        }
        *o = acc;
    }
}

/// Full conditional of `D_g`: `P(D_g = k) ∝ ρ_k Π_h ν_kh^{n_gh}`.
pub fn d_conditional(row: &[u32], rho: &[f64], nu: &[f64]) -> Vec<f64> {
    let ln_rho: Vec<f64> = rho.iter().map(|r| r.ln()).collect();
    let ln_nu: Vec<f64> = nu.iter().map(|v| v.ln()).collect();
    let mut lw = vec![0.0; rho.len()];
    group_log_weights(row, &ln_rho, &ln_nu, &mut lw);
    crate::math::softmax(&lw)
}

/// Full conditional of `C_i`: `P(C_i = h) ∝ ν_{k h} f(y_i | θ_h, φ)` where
/// `k` is the distributional cluster of the observation's group.
pub fn c_conditional(y: f64, nu_row: &[f64], model: &LikelihoodModel) -> Vec<f64> {
    let mut lw = vec![0.0; nu_row.len()];
    model.log_densities_into(y, &mut lw);
    for (l, v) in lw.iter_mut().zip(nu_row) {
        *l += v.ln();
    }
    crate::math::softmax(&lw)
}

/// Beta parameters for `U_k` (k < K) given `D`.
pub fn u_posterior(d: &[u32], k_total: usize, alpha: f64) -> Vec<(f64, f64)> {
    let mut counts = vec![0u64; k_total];
    for &k in d {
        counts[k as usize] += 1;
    }
    let mut tail: u64 = counts.iter().sum();
    (0..k_total.saturating_sub(1))
        .map(|k| {
            tail -= counts[k];
            (1.0 + counts[k] as f64, alpha + tail as f64)
        })
        .collect()
}

/// Beta parameters for `q_kh` (h < H) given the per-cluster counts
/// `N_kh = #{i : D_{G(X_i)} = k, C_i = h}` (row-major `K × H`).
pub fn q_posterior(n_kh: &[u64], h_total: usize, beta: f64) -> Vec<(f64, f64)> {
    let k_total = n_kh.len() / h_total;
    let mut out = Vec::with_capacity(k_total * (h_total - 1));
    for k in 0..k_total {
        let row = &n_kh[k * h_total..(k + 1) * h_total];
        let mut tail: u64 = row.iter().sum();
        for &n in &row[..h_total - 1] {
            tail -= n;
            out.push((1.0 + n as f64, beta + tail as f64));
        }
    }
    out
}

/// Shape and rate of the `α` and `β` full conditionals, from the stored
/// log complements `ln(1 - x)` of the sticks.
pub fn concentration_posteriors(
    sticks: &StickVariables,
    hyper: &Hyperparameters,
) -> ((f64, f64), (f64, f64)) {
    let (kk, hh) = (sticks.k, sticks.h);
    let su: f64 = sticks.log1m_u[..kk - 1].iter().sum();
    let mut sq = 0.0;
    for k in 0..kk {
        sq += sticks.log1m_q[k * hh..k * hh + hh - 1].iter().sum::<f64>();
    }
    (
        ((kk - 1) as f64 + hyper.a, hyper.b - su),
        (hyper.c + (kk * (hh - 1)) as f64, hyper.d - sq),
    )
}

fn beta_draw<R: Rng + ?Sized>(
    a: f64,
    b: f64,
    rng: &mut R,
    step: &'static str,
) -> Result<(f64, f64)> {
    let (v, lv) =
        sample_beta_log1m(a, b, rng).map_err(|e| Error::numerical(step, format!("{e}")))?;
    if v.is_nan() || lv.is_nan() {
        return Err(Error::numerical(
            step,
            format!("Beta({a}, {b}) returned NaN"),
        ));
    }
    Ok((v, lv))
}

fn gamma_draw<R: Rng + ?Sized>(
    shape: f64,
    rate: f64,
    rng: &mut R,
    step: &'static str,
) -> Result<f64> {
    let v = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::numerical(step, format!("Gamma({shape}, {rate}): {e}")))?
        .sample(rng);
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::numerical(
            step,
            format!("Gamma({shape}, {rate}) returned {v}"),
        ));
    }
    Ok(v)
}

/// A chain in progress. The fields are public so tests and diagnostics can
/// inspect or pin individual blocks.
#[derive(Debug, Clone)]
pub struct Chain<'a, R> {
    pub data: &'a Dataset,
    pub spec: ModelSpec,
    /// Responses; a copy so joint-distribution tests can regenerate them.
    pub y: Vec<f64>,
    pub tree: PyramidTree,
    /// Group of each observation under the current tree.
    pub groups: Vec<u32>,
    pub num_groups: usize,
    pub state: LatentState,
    pub model: LikelihoodModel,
    pub counts: GroupCounts,
    pub move_stats: MoveStats,
    pub rng: R,
    ln_rho: Vec<f64>,
    ln_nu: Vec<f64>,
    scratch_groups: Vec<u32>,
    scratch_counts: GroupCounts,
    scratch_lw: Vec<f64>,
    scratch_cum: Vec<f64>,
    buckets: Vec<Vec<f64>>,
}

impl<'a, R: Rng> Chain<'a, R> {
    /// Initial state: tree from its prior, `C_i` uniform on `1..H`, `D_g`
    /// uniform on `1..K`, concentrations at their prior means, sticks from
    /// their prior, atoms from the base measure.
    pub fn new(data: &'a Dataset, spec: ModelSpec, mut rng: R) -> Result<Self> {
        spec.validate()?;
        if data.n == 0 {
            return Err(Error::Empty("dataset has no observations".into()));
        }
        let kk = spec.effective_k();
        let hh = spec.trunc.h;
        let model = LikelihoodModel::from_prior(&spec.family, hh, &mut rng)?;
        model.check_support(&data.y)?;

        let (tree, groups, num_groups) = match &spec.structure {
            Structure::Pyramid(cfg) => {
                if data.p == 0 {
                    return Err(Error::Config(
                        "the pyramid model needs at least one predictor".into(),
                    ));
                }
                let tree = sample_tree_prior(cfg, &data.bounds, &mut rng)?;
                let groups = tree.assign_groups(data);
                let g = tree.num_groups();
                (tree, groups, g)
            }
            Structure::Fixed(fg) => {
                if fg.labels.len() != data.n {
                    return Err(Error::LengthMismatch {
                        expected: data.n,
                        found: fg.labels.len(),
                    });
                }
                (PyramidTree::root(0), fg.labels.clone(), fg.num_groups)
            }
            Structure::Single => (PyramidTree::root(0), vec![0; data.n], 1),
        };

        let alpha = spec.hyper.alpha_prior_mean();
        let beta = spec.hyper.beta_prior_mean();
        let trunc = TruncationLevels { k: kk, h: hh };
        let sticks = StickVariables::sample_prior(trunc, alpha, beta, &mut rng)?;
        let weights = StickWeights::from_sticks(&sticks)?;
        let c: Vec<u32> = (0..data.n)
            .map(|_| rng.random_range(0..hh as u32))
            .collect();
        let d: Vec<u32> = (0..num_groups)
            .map(|_| rng.random_range(0..kk as u32))
            .collect();

        let mut counts = GroupCounts::default();
        counts.fill(&groups, &c, num_groups, hh);
        let mut chain = Chain {
            data,
            y: data.y.clone(),
            spec,
            tree,
            groups,
            num_groups,
            state: LatentState {
                c,
                d,
                sticks,
                weights,
                alpha,
                beta,
            },
            model,
            counts,
            move_stats: MoveStats::default(),
            rng,
            ln_rho: Vec::new(),
            ln_nu: Vec::new(),
            scratch_groups: Vec::new(),
            scratch_counts: GroupCounts::default(),
            scratch_lw: vec![0.0; hh.max(kk)],
            scratch_cum: Vec::with_capacity(hh.max(kk)),
            buckets: vec![Vec::new(); hh],
        };
        chain.refresh_log_weights();
        Ok(chain)
    }

    fn refresh_log_weights(&mut self) {
        self.ln_rho.clear();
        self.ln_rho
            .extend(self.state.weights.rho.iter().map(|r| r.ln()));
        self.ln_nu.clear();
        self.ln_nu
            .extend(self.state.weights.nu.iter().map(|v| v.ln()));
    }

    /// Recompute `n_gh` after editing `groups`, `c` or `num_groups` by hand.
    pub fn refresh_counts(&mut self) {
        self.counts.fill(
            &self.groups,
            &self.state.c,
            self.num_groups,
            self.spec.trunc.h,
        );
    }

    /// One full sweep.
    pub fn sweep(&mut self) -> Result<()> {
        self.step_tree()?;
        self.step_d()?;
        self.step_c()?;
        self.step_sticks()?;
        self.step_atoms()?;
        self.step_global()?;
        self.step_concentrations()
    }

    /// MH update of the tree with `D` marginalized out. On acceptance every
    /// `D_g` of the new leaf space is redrawn from its full conditional.
    /// Returns whether a proposal was accepted.
    pub fn step_tree(&mut self) -> Result<bool> {
        let Structure::Pyramid(cfg) = &self.spec.structure else {
            return Ok(false);
        };
        let cfg = *cfg;
        let bounds = &self.data.bounds;
        let out = propose_move(&self.tree, &cfg, bounds, &mut self.rng);
        let kind = out.kind as usize;
        self.move_stats.proposed[kind] += 1;
        if out.auto_reject {
            self.move_stats.auto_rejected[kind] += 1;
            return Ok(false);
        }
        let proposed = out.proposed_tree;
        proposed.assign_groups_into(self.data, &mut self.scratch_groups);
        let g_new = proposed.num_groups();
        self.scratch_counts.fill(
            &self.scratch_groups,
            &self.state.c,
            g_new,
            self.spec.trunc.h,
        );

        let w = &self.state.weights;
        let ll_new = marginal_tree_loglik(&self.scratch_counts, &w.rho, &w.nu)?;
        let ll_cur = marginal_tree_loglik(&self.counts, &w.rho, &w.nu)?;
        let lp_new = tree_log_prior(&proposed, &cfg, bounds)?;
        let lp_cur = tree_log_prior(&self.tree, &cfg, bounds)?;
        let log_acc = ll_new - ll_cur + lp_new - lp_cur + out.log_hastings_ratio;
        if log_acc.is_nan() {
            return Err(Error::numerical("tree", "NaN acceptance ratio"));
        }
        let u: f64 = self.rng.random();
        if u.ln() >= log_acc {
            return Ok(false);
        }
        self.move_stats.accepted[kind] += 1;
        self.tree = proposed;
        core::mem::swap(&mut self.groups, &mut self.scratch_groups);
        core::mem::swap(&mut self.counts, &mut self.scratch_counts);
        self.num_groups = g_new;
        self.state.d.resize(g_new, 0);
        self.step_d()?;
        Ok(true)
    }

    /// Draw every `D_g` from its full conditional given the current counts.
    pub fn step_d(&mut self) -> Result<()> {
        let kk = self.spec.effective_k();
        if kk == 1 {
            self.state.d.iter_mut().for_each(|d| *d = 0);
            return Ok(());
        }
        self.refresh_log_weights();
        self.scratch_lw.resize(kk, 0.0);
        for g in 0..self.num_groups {
            let lw = &mut self.scratch_lw[..kk];
            if self.counts.group_sizes[g] == 0 {
                lw.copy_from_slice(&self.ln_rho);
            } else {
                group_log_weights(self.counts.row(g), &self.ln_rho, &self.ln_nu, lw);
            }
            self.state.d[g] =
                sample_log_categorical(lw, &mut self.scratch_cum, &mut self.rng, "D")? as u32;
        }
        Ok(())
    }

    /// Draw every `C_i` from its full conditional.
    pub fn step_c(&mut self) -> Result<()> {
        let hh = self.spec.trunc.h;
        self.refresh_log_weights();
        self.scratch_lw.resize(hh, 0.0);
        for i in 0..self.y.len() {
            let k = self.state.d[self.groups[i] as usize] as usize;
            let lw = &mut self.scratch_lw[..hh];
            self.model.log_densities_into(self.y[i], lw);
            for (l, &lv) in lw.iter_mut().zip(&self.ln_nu[k * hh..(k + 1) * hh]) {
                *l += lv;
            }
            self.state.c[i] =
                sample_log_categorical(lw, &mut self.scratch_cum, &mut self.rng, "C")? as u32;
        }
        self.refresh_counts();
        Ok(())
    }

    /// Update `U`, `q` and the derived weights.
    pub fn step_sticks(&mut self) -> Result<()> {
        let kk = self.spec.effective_k();
        let hh = self.spec.trunc.h;
        for (k, (a, b)) in u_posterior(&self.state.d, kk, self.state.alpha)
            .into_iter()
            .enumerate()
        {
            let (v, lv) = beta_draw(a, b, &mut self.rng, "U")?;
            self.state.sticks.u[k] = v;
            self.state.sticks.log1m_u[k] = lv;
        }
        self.state.sticks.u[kk - 1] = 1.0;
        self.state.sticks.log1m_u[kk - 1] = f64::NEG_INFINITY;

        let mut n_kh = vec![0u64; kk * hh];
        for &g in &self.counts.nonempty {
            let k = self.state.d[g as usize] as usize;
            for (acc, &n) in n_kh[k * hh..(k + 1) * hh]
                .iter_mut()
                .zip(self.counts.row(g as usize))
            {
                *acc += n as u64;
            }
        }
        let params = q_posterior(&n_kh, hh, self.state.beta);
        for k in 0..kk {
            for h in 0..hh - 1 {
                let (a, b) = params[k * (hh - 1) + h];
                let (v, lv) = beta_draw(a, b, &mut self.rng, "q")?;
                self.state.sticks.q[k * hh + h] = v;
                self.state.sticks.log1m_q[k * hh + h] = lv;
            }
            self.state.sticks.q[k * hh + hh - 1] = 1.0;
            self.state.sticks.log1m_q[k * hh + hh - 1] = f64::NEG_INFINITY;
        }
        self.state.weights.refresh(&self.state.sticks)?;
        self.refresh_log_weights();
        Ok(())
    }

    /// Update every atom given its members; empty clusters redraw from the
    /// base measure.
    pub fn step_atoms(&mut self) -> Result<()> {
        for b in &mut self.buckets {
            b.clear();
        }
        for (&yi, &ci) in self.y.iter().zip(&self.state.c) {
            self.buckets[ci as usize].push(yi);
        }
        for h in 0..self.spec.trunc.h {
            self.model
                .sample_atom_posterior(h, &self.buckets[h], &mut self.rng)?;
        }
        Ok(())
    }

    pub fn step_global(&mut self) -> Result<()> {
        self.model
            .sample_global(&self.y, &self.state.c, &mut self.rng)
    }

    pub fn step_concentrations(&mut self) -> Result<()> {
        let ((sa, ra), (sb, rb)) = concentration_posteriors(&self.state.sticks, &self.spec.hyper);
        self.state.alpha = gamma_draw(sa, ra, &mut self.rng, "alpha")?;
        self.state.beta = gamma_draw(sb, rb, &mut self.rng, "beta")?;
        Ok(())
    }

    /// `Σ_i ln f(y_i | θ_{C_i}, φ)`.
    pub fn log_likelihood(&mut self) -> f64 {
        let hh = self.spec.trunc.h;
        self.scratch_lw.resize(hh, 0.0);
        let mut total = 0.0;
        for (&yi, &ci) in self.y.iter().zip(&self.state.c) {
            let lw = &mut self.scratch_lw[..hh];
            self.model.log_densities_into(yi, lw);
            total += lw[ci as usize];
        }
        total
    }

    pub fn record(&mut self, iteration: usize) -> IterationRecord {
        let log_likelihood = self.log_likelihood();
        IterationRecord {
            iteration,
            c: self.state.c.clone(),
            groups: self.groups.clone(),
            d: self.state.d.clone(),
            tree: self.tree.clone(),
            atoms: self.model.atoms(),
            global: self.model.global(),
            alpha: self.state.alpha,
            beta: self.state.beta,
            rho: self.state.weights.rho.clone(),
            nu: self.state.weights.nu.clone(),
            log_likelihood,
        }
    }
}

/// Run one chain to completion and return its recorded draws.
pub fn run_chain<R: Rng>(
    data: &Dataset,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
    chain_index: u64,
    rng: R,
) -> Result<ChainTrace> {
    cfg.validate()?;
    let mut chain = Chain::new(data, spec.clone(), rng)?;
    let mut records = Vec::with_capacity(cfg.kept());
    for it in 0..cfg.iterations {
        chain.sweep().map_err(|e| Error::Aborted {
            iteration: it,
            source: Box::new(e),
        })?;
        if chain.state.alpha.is_nan() || chain.state.beta.is_nan() {
            return Err(Error::Aborted {
                iteration: it,
                source: Box::new(Error::numerical("concentrations", "NaN")),
            });
        }
        if cfg.keeps(it) {
            records.push(chain.record(it));
        }
    }
    let r_moves = match &chain.model {
        LikelihoodModel::NegBin(m) => Some((m.r_proposals, m.r_accepts)),
        LikelihoodModel::Gaussian(_) => None,
    };
    Ok(ChainTrace {
        method: spec.structure.method(),
        family: spec.family.family(),
        chain_index,
        k: spec.effective_k(),
        h: spec.trunc.h,
        records,
        move_stats: chain.move_stats,
        r_moves,
    })
}

/// Run `cfg.chains` chains one after another, chain `c` on stream
/// `chain_rng(cfg.seed, c)`.
pub fn run_chains(
    data: &Dataset,
    spec: &ModelSpec,
    cfg: &SamplerConfig,
) -> Result<Vec<ChainTrace>> {
    (0..cfg.chains as u64)
        .map(|c| run_chain(data, spec, cfg, c, crate::rng::chain_rng(cfg.seed, c)))
        .collect()
}
