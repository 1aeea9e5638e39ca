//! Pyramid trees: every node at a given depth shares one splitting rule, so a
//! tree of depth `d` is just an ordered list of `d` rules and defines `2^d`
//! leaf groups.
//!
//! Leaf labels use binary-path coding: observation `x` lands in group
//! `Σ_λ I(x[j_λ] >= η_λ) 2^λ` (0-based levels and labels).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;
use rand::distr::Open01;
use rand::Rng;

use crate::data::{Dataset, QuantileBounds};
use crate::error::{Error, Result};

/// Deepest tree allowed by the label type.
pub const MAX_SUPPORTED_DEPTH: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SplittingRule {
    /// 0-based predictor column.
    pub predictor: usize,
    pub threshold: f64,
}

impl SplittingRule {
    #[inline]
    pub fn goes_right(&self, x: &[f64]) -> bool {
        x[self.predictor] >= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PyramidTree {
    pub rules: Vec<SplittingRule>,
    pub max_depth: usize,
}

impl PyramidTree {
    pub fn root(max_depth: usize) -> Self {
        PyramidTree {
            rules: Vec::new(),
            max_depth,
        }
    }

    pub fn depth(&self) -> usize {
        self.rules.len()
    }

    /// Size of the leaf label space, `2^d`.
    pub fn num_groups(&self) -> usize {
        1usize << self.rules.len()
    }

    /// 0-based leaf label of `x`.
    #[inline]
    pub fn assign_group(&self, x: &[f64]) -> u32 {
        self.rules.iter().enumerate().fold(0u32, |acc, (lvl, r)| {
            acc | ((r.goes_right(x) as u32) << lvl)
        })
    }

    /// Leaf label of every row of `data`, written into `out`.
    pub fn assign_groups_into(&self, data: &Dataset, out: &mut Vec<u32>) {
        out.clear();
        out.extend((0..data.n).map(|i| self.assign_group(data.row(i))));
    }

    pub fn assign_groups(&self, data: &Dataset) -> Vec<u32> {
        let mut out = Vec::with_capacity(data.n);
        self.assign_groups_into(data, &mut out);
        out
    }

    pub fn uses_predictor(&self, j: usize) -> bool {
        self.rules.iter().any(|r| r.predictor == j)
    }
}

/// Proposal weights for the four tree moves.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MoveProbabilities {
    pub grow: f64,
    pub prune: f64,
    pub resplit: f64,
    pub change: f64,
}

impl Default for MoveProbabilities {
    fn default() -> Self {
        MoveProbabilities {
            grow: 0.25,
            prune: 0.25,
            resplit: 0.25,
            change: 0.25,
        }
    }
}

impl MoveProbabilities {
    pub fn as_array(&self) -> [f64; 4] {
        [self.grow, self.prune, self.resplit, self.change]
    }

    pub fn get(&self, kind: MoveKind) -> f64 {
        self.as_array()[kind as usize]
    }

    pub fn validate(&self) -> Result<()> {
        let arr = self.as_array();
        if arr.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config(format!(
                "move probabilities must be nonnegative: {arr:?}"
            )));
        }
        let sum: f64 = arr.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "move probabilities sum to {sum}, not 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeConfig {
    /// Base split probability `a_T` in `P_split(λ) = a_T λ^{-b_T}`.
    pub a_t: f64,
    pub b_t: f64,
    pub q1: f64,
    pub q2: f64,
    pub max_depth: usize,
    pub move_probs: MoveProbabilities,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            a_t: 0.95,
            b_t: 0.5,
            q1: 0.05,
            q2: 0.95,
            max_depth: 10,
            move_probs: MoveProbabilities::default(),
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.a_t) {
            return Err(Error::Config(format!(
                "a_T must lie in [0, 1), got {}",
                self.a_t
            )));
        }
        if !(self.b_t >= 0.0 && self.b_t.is_finite()) {
            return Err(Error::Config(format!(
                "b_T must be nonnegative, got {}",
                self.b_t
            )));
        }
        if !(0.0..=1.0).contains(&self.q1) || !(0.0..=1.0).contains(&self.q2) || self.q1 >= self.q2
        {
            return Err(Error::Config(format!(
                "quantile levels must satisfy 0 <= q1 < q2 <= 1, got ({}, {})",
                self.q1, self.q2
            )));
        }
        if self.max_depth > MAX_SUPPORTED_DEPTH {
            return Err(Error::Config(format!(
                "max depth {} exceeds the supported {}",
                self.max_depth, MAX_SUPPORTED_DEPTH
            )));
        }
        self.move_probs.validate()
    }

    /// Probability of adding level `level` (1-based) to a tree of depth
    /// `level - 1`; zero beyond the maximum depth.
    pub fn p_split(&self, level: usize) -> f64 {
        if level == 0 || level > self.max_depth {
            0.0
        } else {
            self.a_t * (level as f64).powf(-self.b_t)
        }
    }
}

fn splittable(bounds: &[QuantileBounds]) -> impl Iterator<Item = usize> + '_ {
    bounds
        .iter()
        .enumerate()
        .filter(|(_, b)| b.is_splittable())
        .map(|(j, _)| j)
}

/// Log prior density of `tree`:
///
/// `Σ_λ ln P_split(λ) + d ln(1/P) + ln(1 - P_split(d+1)) - Σ_λ ln range(j_λ)`
///
/// where `P` counts the predictors that can be split.
pub fn tree_log_prior(
    tree: &PyramidTree,
    cfg: &TreeConfig,
    bounds: &[QuantileBounds],
) -> Result<f64> {
    let d = tree.depth();
    if d > cfg.max_depth {
        return Err(Error::domain(format!(
            "tree depth {d} exceeds maximum {}",
            cfg.max_depth
        )));
    }
    let n_split = splittable(bounds).count();
    if n_split == 0 {
        // Splitting is impossible, so the root is the only tree.
        return if d == 0 {
            Ok(0.0)
        } else {
            Err(Error::domain("tree splits but no predictor is splittable"))
        };
    }
    let mut lp = 0.0;
    for (lvl, rule) in tree.rules.iter().enumerate() {
        let b = bounds.get(rule.predictor).ok_or_else(|| {
            Error::domain(format!(
                "predictor index {} out of range",
                rule.predictor + 1
            ))
        })?;
        if !b.is_splittable() || !b.contains_strictly(rule.threshold) {
            return Err(Error::domain(format!(
                "threshold {} for predictor {} outside ({}, {})",
                rule.threshold,
                rule.predictor + 1,
                b.lower,
                b.upper
            )));
        }
        lp += cfg.p_split(lvl + 1).ln() - (n_split as f64).ln() - b.range().ln();
    }
    lp += (1.0 - cfg.p_split(d + 1)).ln();
    Ok(lp)
}

/// Draw one splitting rule: predictor uniform over the splittable columns,
/// threshold uniform on its quantile interval.
pub fn draw_rule<R: Rng + ?Sized>(bounds: &[QuantileBounds], rng: &mut R) -> Option<SplittingRule> {
    let n_split = splittable(bounds).count();
    if n_split == 0 {
        return None;
    }
    let pick = rng.random_range(0..n_split);
    let predictor = splittable(bounds).nth(pick)?;
    Some(SplittingRule {
        predictor,
        threshold: draw_threshold(&bounds[predictor], rng),
    })
}

fn draw_threshold<R: Rng + ?Sized>(b: &QuantileBounds, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    b.lower + u * b.range()
}

/// Draw a tree from its prior by sequentially attempting to add levels.
pub fn sample_tree_prior<R: Rng + ?Sized>(
    cfg: &TreeConfig,
    bounds: &[QuantileBounds],
    rng: &mut R,
) -> Result<PyramidTree> {
    cfg.validate()?;
    let mut tree = PyramidTree::root(cfg.max_depth);
    while tree.depth() < cfg.max_depth {
        if rng.random::<f64>() >= cfg.p_split(tree.depth() + 1) {
            break;
        }
        match draw_rule(bounds, rng) {
            Some(rule) => tree.rules.push(rule),
            None => break,
        }
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MoveKind {
    Grow = 0,
    Prune = 1,
    ReSplit = 2,
    ChangeVariable = 3,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [
        MoveKind::Grow,
        MoveKind::Prune,
        MoveKind::ReSplit,
        MoveKind::ChangeVariable,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MoveKind::Grow => "grow",
            MoveKind::Prune => "prune",
            MoveKind::ReSplit => "resplit",
            MoveKind::ChangeVariable => "change_variable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalOutcome {
    pub kind: MoveKind,
    pub proposed_tree: PyramidTree,
    /// `ln u(T' -> T) - ln u(T -> T')`; the prior and likelihood ratios are
    /// added by the caller.
    pub log_hastings_ratio: f64,
    pub auto_reject: bool,
}

impl ProposalOutcome {
    fn rejected(kind: MoveKind, tree: &PyramidTree) -> Self {
        ProposalOutcome {
            kind,
            proposed_tree: tree.clone(),
            log_hastings_ratio: 0.0,
            auto_reject: true,
        }
    }
}

/// Pick a move type by `cfg.move_probs`.
pub fn choose_move<R: Rng + ?Sized>(cfg: &TreeConfig, rng: &mut R) -> MoveKind {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for kind in MoveKind::ALL {
        acc += cfg.move_probs.get(kind);
        if u < acc {
            return kind;
        }
    }
    // Rounding left u above the cumulative sum; take the last move with mass.
    *MoveKind::ALL
        .iter()
        .rev()
        .find(|k| cfg.move_probs.get(**k) > 0.0)
        .unwrap_or(&MoveKind::Grow)
}

/// Propose a neighbour of `tree` with one of the four moves.
pub fn propose_move<R: Rng + ?Sized>(
    tree: &PyramidTree,
    cfg: &TreeConfig,
    bounds: &[QuantileBounds],
    rng: &mut R,
) -> ProposalOutcome {
    let kind = choose_move(cfg, rng);
    propose_kind(tree, kind, cfg, bounds, rng)
}

/// Propose a neighbour of `tree` with a fixed move type.
///
/// Proposal densities, with `P` splittable predictors and `r(j)` the
/// quantile range of predictor `j`:
///
/// * GROW from depth `d`: new rule inserted at one of the `d + 1` level
///   slots, `p_grow / ((d+1) P r(j))`; reverse PRUNE `p_prune / (d+1)`.
/// * RE-SPLIT: `p_resplit / (d r(j))` both ways.
/// * CHANGE VARIABLE: `p_change / (d P r(j_new))`, reverse uses `r(j_old)`.
pub fn propose_kind<R: Rng + ?Sized>(
    tree: &PyramidTree,
    kind: MoveKind,
    cfg: &TreeConfig,
    bounds: &[QuantileBounds],
    rng: &mut R,
) -> ProposalOutcome {
    let d = tree.depth();
    let mp = &cfg.move_probs;
    let n_split = splittable(bounds).count() as f64;
    match kind {
        MoveKind::Grow => {
            if d >= cfg.max_depth {
                return ProposalOutcome::rejected(kind, tree);
            }
            let Some(rule) = draw_rule(bounds, rng) else {
                return ProposalOutcome::rejected(kind, tree);
            };
            let slot = rng.random_range(0..=d);
            let mut proposed = tree.clone();
            proposed.rules.insert(slot, rule);
            let r = bounds[rule.predictor].range();
            // The (d+1) slot factor cancels against the reverse PRUNE choice.
            let log_hr = mp.prune.ln() - mp.grow.ln() + n_split.ln() + r.ln();
            ProposalOutcome {
                kind,
                proposed_tree: proposed,
                log_hastings_ratio: log_hr,
                auto_reject: false,
            }
        }
        MoveKind::Prune => {
            if d == 0 {
                return ProposalOutcome::rejected(kind, tree);
            }
            let lvl = rng.random_range(0..d);
            let mut proposed = tree.clone();
            let removed = proposed.rules.remove(lvl);
            let r = bounds[removed.predictor].range();
            let log_hr = mp.grow.ln() - mp.prune.ln() - n_split.ln() - r.ln();
            ProposalOutcome {
                kind,
                proposed_tree: proposed,
                log_hastings_ratio: log_hr,
                auto_reject: false,
            }
        }
        MoveKind::ReSplit => {
            if d == 0 {
                return ProposalOutcome::rejected(kind, tree);
            }
            let lvl = rng.random_range(0..d);
            let mut proposed = tree.clone();
            let j = proposed.rules[lvl].predictor;
            proposed.rules[lvl].threshold = draw_threshold(&bounds[j], rng);
            ProposalOutcome {
                kind,
                proposed_tree: proposed,
                log_hastings_ratio: 0.0,
                auto_reject: false,
            }
        }
        MoveKind::ChangeVariable => {
            if d == 0 {
                return ProposalOutcome::rejected(kind, tree);
            }
            let lvl = rng.random_range(0..d);
            let Some(rule) = draw_rule(bounds, rng) else {
                return ProposalOutcome::rejected(kind, tree);
            };
            let mut proposed = tree.clone();
            let old = core::mem::replace(&mut proposed.rules[lvl], rule);
            let log_hr = bounds[rule.predictor].range().ln() - bounds[old.predictor].range().ln();
            ProposalOutcome {
                kind,
                proposed_tree: proposed,
                log_hastings_ratio: log_hr,
                auto_reject: false,
            }
        }
    }
}

/// Group-by-cluster counts `n_gh` for one tree (or a fixed grouping).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupCounts {
    pub num_groups: usize,
    pub h: usize,
    /// Row-major `num_groups × h`.
    pub counts: Vec<u32>,
    pub group_sizes: Vec<u32>,
    /// Groups with at least one observation, ascending.
    pub nonempty: Vec<u32>,
}

impl GroupCounts {
    pub fn row(&self, g: usize) -> &[u32] {
        &self.counts[g * self.h..(g + 1) * self.h]
    }

    pub fn total(&self) -> u64 {
        self.group_sizes.iter().map(|&s| s as u64).sum()
    }

    /// Recompute from per-observation group and cluster labels.
    pub fn fill(&mut self, groups: &[u32], c: &[u32], num_groups: usize, h: usize) {
        self.num_groups = num_groups;
        self.h = h;
        self.counts.clear();
        self.counts.resize(num_groups * h, 0);
        self.group_sizes.clear();
        self.group_sizes.resize(num_groups, 0);
        for (&g, &ci) in groups.iter().zip(c) {
            self.counts[g as usize * h + ci as usize] += 1;
            self.group_sizes[g as usize] += 1;
        }
        self.nonempty.clear();
        self.nonempty.extend(
            self.group_sizes
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > 0)
                .map(|(g, _)| g as u32),
        );
    }
}

/// `n_gh = #{i : G(X_i) = g, C_i = h}` under `tree`, plus the nonempty leaves.
pub fn group_counts(
    tree: &PyramidTree,
    data: &Dataset,
    c: &[u32],
    h: usize,
) -> Result<GroupCounts> {
    if c.len() != data.n {
        return Err(Error::LengthMismatch {
            expected: data.n,
            found: c.len(),
        });
    }
    if let Some(bad) = c.iter().find(|&&ci| ci as usize >= h) {
        return Err(Error::domain(format!(
            "cluster label {} exceeds H = {h}",
            bad + 1
        )));
    }
    let groups = tree.assign_groups(data);
    let mut gc = GroupCounts::default();
    gc.fill(&groups, c, tree.num_groups(), h);
    Ok(gc)
}

/// Number of leaves holding at least one row of `data`.
pub fn nonempty_leaves(tree: &PyramidTree, data: &Dataset) -> usize {
    let mut seen = vec![false; tree.num_groups()];
    for i in 0..data.n {
        seen[tree.assign_group(data.row(i)) as usize] = true;
    }
    seen.iter().filter(|s| **s).count()
}
