//! Post-MCMC summaries: co-clustering matrices, Dahl point estimates, ARI,
//! predictive functionals, LPDS and tree summaries.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // needed without std
use num_traits::Float;

use crate::error::{Error, Result};
use crate::likelihood::{log_density, mean_functional, Atom};
use crate::math::{log_sum_exp, quantile_sorted};
use crate::sampler::{ChainTrace, IterationRecord};

/// Which latent partition a summary refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LabelKind {
    /// Observational clusters `C`.
    Oc,
    /// Predictor groups `G(X)`.
    Group,
    /// Distributional clusters `D_{G(X)}`.
    Dc,
}

impl LabelKind {
    pub const ALL: [LabelKind; 3] = [LabelKind::Oc, LabelKind::Group, LabelKind::Dc];

    pub fn name(&self) -> &'static str {
        match self {
            LabelKind::Oc => "oc",
            LabelKind::Group => "group",
            LabelKind::Dc => "dc",
        }
    }
}

/// Per-observation labels of one draw.
pub fn labels(rec: &IterationRecord, kind: LabelKind) -> Vec<u32> {
    match kind {
        LabelKind::Oc => rec.c.clone(),
        LabelKind::Group => rec.groups.clone(),
        LabelKind::Dc => rec.dc_labels(),
    }
}

/// Kept draws of several chains, pooled in chain order.
pub fn pooled(traces: &[ChainTrace]) -> Vec<&IterationRecord> {
    traces.iter().flat_map(|t| t.records.iter()).collect()
}

/// Relabel by order of first appearance so equal partitions compare equal.
pub fn canonical(labels: &[u32]) -> Vec<u32> {
    let mut map = BTreeMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len() as u32;
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// Members of each block of a canonical partition.
fn blocks(canon: &[u32]) -> Vec<Vec<u32>> {
    let k = canon.iter().max().map_or(0, |m| *m as usize + 1);
    let mut out = vec![Vec::new(); k];
    for (i, &l) in canon.iter().enumerate() {
        out[l as usize].push(i as u32);
    }
    out
}

/// Distinct partitions with their multiplicity and first index.
struct Distinct {
    partitions: Vec<Vec<u32>>,
    weights: Vec<usize>,
    first_index: Vec<usize>,
}

fn distinct<'a, I: IntoIterator<Item = &'a [u32]>>(parts: I) -> Distinct {
    let mut index: BTreeMap<Vec<u32>, usize> = BTreeMap::new();
    let mut d = Distinct {
        partitions: Vec::new(),
        weights: Vec::new(),
        first_index: Vec::new(),
    };
    for (m, p) in parts.into_iter().enumerate() {
        let c = canonical(p);
        match index.get(&c) {
            Some(&slot) => d.weights[slot] += 1,
            None => {
                index.insert(c.clone(), d.partitions.len());
                d.partitions.push(c);
                d.weights.push(1);
                d.first_index.push(m);
            }
        }
    }
    d
}

/// Symmetric `n × n` matrix of empirical co-clustering probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct CoclusteringMatrix {
    pub kind: LabelKind,
    pub n: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl CoclusteringMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// Build from sampled partitions of the same `n` observations.
    pub fn from_partitions<'a, I>(kind: LabelKind, parts: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [u32]>,
    {
        let d = distinct(parts);
        let m: usize = d.weights.iter().sum();
        if m == 0 {
            return Err(Error::Empty("no kept iterations".into()));
        }
        let n = d.partitions[0].len();
        if let Some(bad) = d.partitions.iter().find(|p| p.len() != n) {
            return Err(Error::LengthMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        let mut counts = vec![0u32; n * n];
        for (p, &w) in d.partitions.iter().zip(&d.weights) {
            let w = w as u32;
            for block in blocks(p) {
                for (a, &i) in block.iter().enumerate() {
                    let row = &mut counts[i as usize * n..(i as usize + 1) * n];
                    for &j in &block[a..] {
                        row[j as usize] += w;
                    }
                }
            }
        }
        let inv = 1.0 / m as f64;
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = counts[i * n + j] as f64 * inv;
                values[i * n + j] = v;
                values[j * n + i] = v;
            }
        }
        Ok(CoclusteringMatrix { kind, n, values })
    }
}

/// Pooled co-clustering matrix of the requested kind.
pub fn coclustering_matrix(
    records: &[&IterationRecord],
    kind: LabelKind,
) -> Result<CoclusteringMatrix> {
    let parts: Vec<Vec<u32>> = records.iter().map(|r| labels(r, kind)).collect();
    CoclusteringMatrix::from_partitions(kind, parts.iter().map(|p| p.as_slice()))
}

/// A sampled partition chosen as point estimate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PartitionEstimate {
    /// Labels as sampled at `source_iteration`.
    pub labels: Vec<u32>,
    /// Position of the draw among the candidates.
    pub source_iteration: usize,
    pub loss: f64,
}

/// `Σ_{i,j} [I(l_i = l_j) − P_ij]²` over all ordered pairs, via block sums.
pub fn dahl_loss(matrix: &CoclusteringMatrix, labels: &[u32]) -> Result<f64> {
    let n = matrix.n;
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let sum_sq: f64 = matrix.values.iter().map(|v| v * v).sum();
    Ok(dahl_loss_with(matrix, &canonical(labels), sum_sq))
}

fn dahl_loss_with(matrix: &CoclusteringMatrix, canon: &[u32], sum_sq: f64) -> f64 {
    // Σ (I − P)² = Σ I − 2 Σ_{same} P + Σ P², with Σ I − 2 Σ_same P = Σ_same (1 − 2P).
    let mut same = 0.0;
    for block in blocks(canon) {
        for &i in &block {
            let row = matrix.row(i as usize);
            for &j in &block {
                same += 1.0 - 2.0 * row[j as usize];
            }
        }
    }
    (same + sum_sq).max(0.0)
}

/// Relative tolerance under which two Dahl losses count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Candidate minimizing the Dahl loss; ties go to the earliest candidate.
pub fn dahl_estimate<'a, I>(matrix: &CoclusteringMatrix, candidates: I) -> Result<PartitionEstimate>
where
    I: IntoIterator<Item = &'a [u32]>,
{
    let cands: Vec<&[u32]> = candidates.into_iter().collect();
    if cands.is_empty() {
        return Err(Error::Empty("no candidate partitions".into()));
    }
    if let Some(bad) = cands.iter().find(|c| c.len() != matrix.n) {
        return Err(Error::LengthMismatch {
            expected: matrix.n,
            found: bad.len(),
        });
    }
    let d = distinct(cands.iter().copied());
    let sum_sq: f64 = matrix.values.iter().map(|v| v * v).sum();
    let mut best: Option<(f64, usize)> = None;
    for (p, &first) in d.partitions.iter().zip(&d.first_index) {
        let loss = dahl_loss_with(matrix, p, sum_sq);
        let better = match best {
            None => true,
            Some((bl, bi)) => {
                let tol = TIE_TOL * bl.abs().max(1.0);
                loss < bl - tol || (loss <= bl + tol && first < bi)
            }
        };
        if better {
            best = Some((loss, first));
        }
    }
    let (loss, idx) = best.expect("at least one candidate");
    Ok(PartitionEstimate {
        labels: cands[idx].to_vec(),
        source_iteration: idx,
        loss,
    })
}

/// Co-clustering matrix and Dahl estimate of one kind over pooled draws.
pub fn dahl_for(
    records: &[&IterationRecord],
    kind: LabelKind,
) -> Result<(CoclusteringMatrix, PartitionEstimate)> {
    let parts: Vec<Vec<u32>> = records.iter().map(|r| labels(r, kind)).collect();
    let matrix = CoclusteringMatrix::from_partitions(kind, parts.iter().map(|p| p.as_slice()))?;
    let est = dahl_estimate(&matrix, parts.iter().map(|p| p.as_slice()))?;
    Ok((matrix, est))
}

fn choose2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Hubert–Arabie adjusted Rand index.
pub fn ari(p1: &[u32], p2: &[u32]) -> Result<f64> {
    if p1.len() != p2.len() {
        return Err(Error::LengthMismatch {
            expected: p1.len(),
            found: p2.len(),
        });
    }
    let n = p1.len() as u64;
    let mut table: BTreeMap<(u32, u32), u64> = BTreeMap::new();
    let mut rows: BTreeMap<u32, u64> = BTreeMap::new();
    let mut cols: BTreeMap<u32, u64> = BTreeMap::new();
    for (&a, &b) in p1.iter().zip(p2) {
        *table.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sa: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sb: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        // Only reachable when both partitions are all-singletons or both a
        // single block, i.e. when they coincide.
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Point estimate and equal-tailed interval of a predictive functional.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Prediction {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-draw mean functional of every distributional cluster,
/// `Σ_h ν_kh ψ(ϑ_h, φ)`.
fn dc_means(rec: &IterationRecord) -> Vec<f64> {
    let psi: Vec<f64> = rec
        .atoms
        .iter()
        .map(|a| mean_functional(*a, rec.global))
        .collect();
    let k = rec.rho.len();
    (0..k)
        .map(|kk| rec.nu_row(kk).iter().zip(&psi).map(|(v, p)| v * p).sum())
        .collect()
}

/// Where a prediction is made: at new covariates (group found through the
/// sampled tree) or at a known group label.
#[derive(Debug, Clone, Copy)]
pub enum Locator<'a> {
    Covariates(&'a [f64]),
    Group(u32),
    /// The training observation with this index.
    Observation(usize),
}

fn group_at(rec: &IterationRecord, loc: Locator<'_>) -> Result<usize> {
    let g = match loc {
        Locator::Covariates(x) => rec.tree.assign_group(x) as usize,
        Locator::Group(g) => g as usize,
        Locator::Observation(i) => *rec
            .groups
            .get(i)
            .ok_or_else(|| Error::domain(format!("observation {i} out of range")))?
            as usize,
    };
    if g >= rec.d.len() {
        return Err(Error::domain(format!(
            "group {} out of range for {} groups",
            g + 1,
            rec.d.len()
        )));
    }
    Ok(g)
}

/// Posterior mean and `(level/2, 1 − level/2)` quantiles of `ψ̂^m` at each
/// locator. `level = 0.05` gives the 95% interval.
pub fn predict_functional(
    records: &[&IterationRecord],
    locs: &[Locator<'_>],
    level: f64,
) -> Result<Vec<Prediction>> {
    if records.is_empty() {
        return Err(Error::Empty("no kept iterations".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!(
            "interval level {level} outside (0, 1)"
        )));
    }
    let means: Vec<Vec<f64>> = records.iter().map(|r| dc_means(r)).collect();
    let mut draws = vec![0.0; records.len()];
    let mut out = Vec::with_capacity(locs.len());
    for &loc in locs {
        for (m, rec) in records.iter().enumerate() {
            let g = group_at(rec, loc)?;
            draws[m] = means[m][rec.d[g] as usize];
        }
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        draws.sort_by(|a, b| a.total_cmp(b));
        out.push(Prediction {
            mean,
            lower: quantile_sorted(&draws, level / 2.0),
            upper: quantile_sorted(&draws, 1.0 - level / 2.0),
        });
    }
    Ok(out)
}

/// Root mean squared prediction error.
pub fn rmspe(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("no observations".into()));
    }
    let sse: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sse / y.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LpdsReport {
    /// Sum of the finite per-observation terms.
    pub total: f64,
    pub per_observation: Vec<f64>,
    /// Observations with zero predictive density under some draw.
    pub degenerate: Vec<usize>,
}

impl LpdsReport {
    /// LPDS proper: `−∞` as soon as one observation is degenerate.
    pub fn value(&self) -> f64 {
        if self.degenerate.is_empty() {
            self.total
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// `Σ_i (1/M) Σ_m ln Σ_h ν^m_{D_{G(X_i)} h} f(y_i | ϑ^m_h, φ^m)`.
pub fn lpds(records: &[&IterationRecord], y: &[f64], locs: &[Locator<'_>]) -> Result<LpdsReport> {
    if records.is_empty() {
        return Err(Error::Empty("no kept iterations".into()));
    }
    if y.len() != locs.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: locs.len(),
        });
    }
    let ln_nu: Vec<Vec<f64>> = records
        .iter()
        .map(|r| r.nu.iter().map(|v| v.ln()).collect())
        .collect();
    let m = records.len() as f64;
    let mut per = Vec::with_capacity(y.len());
    let mut degenerate = Vec::new();
    let mut lw = Vec::new();
    for (i, (&yi, &loc)) in y.iter().zip(locs).enumerate() {
        let mut acc = 0.0;
        for (rec, lnu) in records.iter().zip(&ln_nu) {
            let k = rec.d[group_at(rec, loc)?] as usize;
            let h = rec.h();
            lw.clear();
            for (hh, atom) in rec.atoms.iter().enumerate() {
                lw.push(lnu[k * h + hh] + density(yi, atom, rec.global)?);
            }
            acc += log_sum_exp(&lw);
        }
        let term = acc / m;
        if term == f64::NEG_INFINITY {
            degenerate.push(i);
        } else if term.is_nan() {
            return Err(Error::numerical(
                "lpds",
                format!("NaN at observation {}", i + 1),
            ));
        }
        per.push(term);
    }
    let total = per.iter().filter(|v| v.is_finite()).sum();
    Ok(LpdsReport {
        total,
        per_observation: per,
        degenerate,
    })
}

fn density(y: f64, atom: &Atom, global: Option<f64>) -> Result<f64> {
    match atom {
        // Zero density rather than an error off the support.
        Atom::NegBin { .. } if y < 0.0 || y.fract() != 0.0 => Ok(f64::NEG_INFINITY),
        _ => log_density(y, *atom, global),
    }
}

/// Fraction of draws whose tree splits on predictor `j`, for `j < p`.
pub fn inclusion_probabilities(records: &[&IterationRecord], p: usize) -> Vec<f64> {
    let mut out = vec![0.0; p];
    if records.is_empty() {
        return out;
    }
    for rec in records {
        for (j, o) in out.iter_mut().enumerate() {
            if rec.tree.uses_predictor(j) {
                *o += 1.0;
            }
        }
    }
    let m = records.len() as f64;
    out.iter_mut().for_each(|v| *v /= m);
    out
}

/// Structural summary of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DrawSummary {
    pub depth: f64,
    pub nonempty_leaves: f64,
    pub largest_leaf: f64,
    pub nonempty_ocs: f64,
    /// Clusters holding at least `ceil(0.01 n)` observations.
    pub meaningful_ocs: f64,
    /// Distinct `D` values among nonempty groups.
    pub dcs: f64,
    pub largest_oc: f64,
}

fn size_stats(labels: &[u32]) -> (usize, usize, Vec<usize>) {
    let mut sizes: BTreeMap<u32, usize> = BTreeMap::new();
    for &l in labels {
        *sizes.entry(l).or_default() += 1;
    }
    let v: Vec<usize> = sizes.into_values().collect();
    (v.len(), v.iter().copied().max().unwrap_or(0), v)
}

/// Minimum size of a "meaningful" cluster for `n` observations.
pub fn meaningful_threshold(n: usize) -> usize {
    (n as f64 * 0.01).ceil() as usize
}

/// Number of clusters of a partition with at least `ceil(0.01 n)` members.
pub fn meaningful_clusters(labels: &[u32]) -> usize {
    let t = meaningful_threshold(labels.len());
    size_stats(labels).2.iter().filter(|&&s| s >= t).count()
}

pub fn draw_summary(rec: &IterationRecord) -> DrawSummary {
    let (leaves, largest_leaf, _) = size_stats(&rec.groups);
    let (ocs, largest_oc, _) = size_stats(&rec.c);
    let mut dcs: Vec<u32> = rec.dc_labels();
    dcs.sort_unstable();
    dcs.dedup();
    DrawSummary {
        depth: rec.tree.depth() as f64,
        nonempty_leaves: leaves as f64,
        largest_leaf: largest_leaf as f64,
        nonempty_ocs: ocs as f64,
        meaningful_ocs: meaningful_clusters(&rec.c) as f64,
        dcs: dcs.len() as f64,
        largest_oc: largest_oc as f64,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TreeSummary {
    pub per_draw: Vec<DrawSummary>,
    pub mean: DrawSummary,
    /// Most frequent multisets of split predictors (0-based, sorted) with
    /// their relative frequency, at most ten.
    pub top_combinations: Vec<(Vec<usize>, f64)>,
}

pub fn tree_summaries(records: &[&IterationRecord]) -> TreeSummary {
    let per_draw: Vec<DrawSummary> = records.iter().map(|r| draw_summary(r)).collect();
    let mut mean = DrawSummary::default();
    let m = per_draw.len().max(1) as f64;
    for d in &per_draw {
        mean.depth += d.depth / m;
        mean.nonempty_leaves += d.nonempty_leaves / m;
        mean.largest_leaf += d.largest_leaf / m;
        mean.nonempty_ocs += d.nonempty_ocs / m;
        mean.meaningful_ocs += d.meaningful_ocs / m;
        mean.dcs += d.dcs / m;
        mean.largest_oc += d.largest_oc / m;
    }
    let mut combos: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for rec in records {
        let mut key: Vec<usize> = rec.tree.rules.iter().map(|r| r.predictor).collect();
        key.sort_unstable();
        *combos.entry(key).or_default() += 1;
    }
    let mut top: Vec<(Vec<usize>, usize)> = combos.into_iter().collect();
    // Stable sort keeps the lexicographic order among equal counts.
    top.sort_by_key(|t| core::cmp::Reverse(t.1));
    top.truncate(10);
    TreeSummary {
        per_draw,
        mean,
        top_combinations: top.into_iter().map(|(k, c)| (k, c as f64 / m)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::gaussian_log_density;
    use crate::tree::{PyramidTree, SplittingRule};
    use proptest::prelude::*;

    fn record(
        c: Vec<u32>,
        groups: Vec<u32>,
        d: Vec<u32>,
        atoms: Vec<f64>,
        nu: Vec<f64>,
    ) -> IterationRecord {
        let k = d
            .iter()
            .max()
            .map_or(1, |m| *m as usize + 1)
            .max(nu.len() / atoms.len());
        IterationRecord {
            iteration: 0,
            c,
            groups,
            d,
            tree: PyramidTree::root(10),
            atoms: atoms
                .into_iter()
                .map(|mean| Atom::Normal { mean })
                .collect(),
            global: Some(1.0),
            alpha: 1.0,
            beta: 1.0,
            rho: vec![1.0 / k as f64; k],
            nu,
            log_likelihood: 0.0,
        }
    }

    #[test]
    fn coclustering_examples() {
        let parts: [&[u32]; 2] = [&[0, 0], &[0, 1]];
        let m = CoclusteringMatrix::from_partitions(LabelKind::Oc, parts).unwrap();
        assert_eq!(m.values, vec![1.0, 0.5, 0.5, 1.0]);
        let same: [&[u32]; 3] = [&[2, 2, 5], &[0, 0, 1], &[1, 1, 0]];
        let m = CoclusteringMatrix::from_partitions(LabelKind::Oc, same).unwrap();
        assert_eq!(m.values, vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let none: [&[u32]; 0] = [];
        assert!(CoclusteringMatrix::from_partitions(LabelKind::Oc, none).is_err());
    }

    #[test]
    fn coclustering_kinds_follow_records() {
        let rec = record(
            vec![0, 1, 1],
            vec![0, 0, 1],
            vec![1, 1],
            vec![0.0, 1.0],
            vec![0.5; 4],
        );
        let recs = [&rec];
        let oc = coclustering_matrix(&recs, LabelKind::Oc).unwrap();
        let gr = coclustering_matrix(&recs, LabelKind::Group).unwrap();
        let dc = coclustering_matrix(&recs, LabelKind::Dc).unwrap();
        assert_eq!(oc.get(1, 2), 1.0);
        assert_eq!(gr.get(1, 2), 0.0);
        assert_eq!(dc.get(0, 2), 1.0);
    }

    fn direct_loss(m: &CoclusteringMatrix, l: &[u32]) -> f64 {
        let mut s = 0.0;
        for i in 0..m.n {
            for j in 0..m.n {
                let ind = if l[i] == l[j] { 1.0 } else { 0.0 };
                s += (ind - m.get(i, j)).powi(2);
            }
        }
        s
    }

    #[test]
    fn dahl_examples() {
        let cands: [&[u32]; 3] = [&[0, 0, 1, 1], &[0, 0, 0, 1], &[0, 1, 2, 3]];
        let m = CoclusteringMatrix::from_partitions(LabelKind::Oc, cands).unwrap();
        let est = dahl_estimate(&m, cands).unwrap();
        let losses: Vec<f64> = cands.iter().map(|c| direct_loss(&m, c)).collect();
        let best = losses.iter().cloned().fold(f64::INFINITY, f64::min);
        let first = losses.iter().position(|&l| l - best < 1e-9).unwrap();
        assert_eq!(est.source_iteration, first);
        assert!((est.loss - best).abs() < 1e-12);

        let single: [&[u32]; 1] = [&[3, 3, 1]];
        let m = CoclusteringMatrix::from_partitions(LabelKind::Oc, single).unwrap();
        let est = dahl_estimate(&m, single).unwrap();
        assert_eq!(est.labels, vec![3, 3, 1]);
        assert_eq!(est.loss, 0.0);

        // Ties go to the earliest candidate.
        let tie: [&[u32]; 2] = [&[0, 1], &[0, 0]];
        let m = CoclusteringMatrix::from_partitions(LabelKind::Oc, tie).unwrap();
        assert_eq!(dahl_estimate(&m, tie).unwrap().source_iteration, 0);
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(ari(&[0, 0, 1, 1], &[1, 1, 0, 0]).unwrap(), 1.0);
        assert!((ari(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap() + 0.5).abs() < 1e-15);
        assert!(ari(&[0, 1], &[0]).is_err());
    }

    /// Every set partition of `n` elements as restricted growth strings.
    fn all_partitions(n: usize) -> Vec<Vec<u32>> {
        let mut out = Vec::new();
        let mut cur = vec![0u32; n];
        fn rec(i: usize, max: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if i == cur.len() {
                out.push(cur.clone());
                return;
            }
            for l in 0..=max + 1 {
                cur[i] = l;
                rec(i + 1, max.max(l), cur, out);
            }
        }
        if n == 0 {
            return vec![Vec::new()];
        }
        rec(1, 0, &mut cur, &mut out);
        out
    }

    /// ARI from the four pair-agreement counts.
    fn pair_count_ari(a: &[u32], b: &[u32]) -> f64 {
        let (mut ss, mut sd, mut ds, mut dd) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                match (a[i] == a[j], b[i] == b[j]) {
                    (true, true) => ss += 1.0,
                    (true, false) => sd += 1.0,
                    (false, true) => ds += 1.0,
                    (false, false) => dd += 1.0,
                }
            }
        }
        let den = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
        if den == 0.0 {
            return 1.0;
        }
        2.0 * (ss * dd - sd * ds) / den
    }

    #[test]
    fn ari_matches_pair_counting_for_small_n() {
        assert_eq!(all_partitions(6).len(), 203);
        for n in 1..=6 {
            let parts = all_partitions(n);
            for a in &parts {
                for b in &parts {
                    let v = ari(a, b).unwrap();
                    assert!((v - pair_count_ari(a, b)).abs() < 1e-12, "{a:?} {b:?}");
                    assert_eq!(v == 1.0, a == b, "{a:?} {b:?}");
                }
            }
        }
    }

    #[test]
    fn prediction_examples() {
        let one = record(vec![0], vec![0], vec![0], vec![2.0], vec![1.0]);
        let p = predict_functional(&[&one], &[Locator::Observation(0)], 0.05).unwrap();
        assert_eq!(
            p[0],
            Prediction {
                mean: 2.0,
                lower: 2.0,
                upper: 2.0
            }
        );

        let two = record(vec![0], vec![0], vec![0], vec![0.0, 4.0], vec![0.5, 0.5]);
        let p = predict_functional(&[&two], &[Locator::Group(0)], 0.05).unwrap();
        assert_eq!(p[0].mean, 2.0);

        let a = record(vec![0], vec![0], vec![0], vec![1.0], vec![1.0]);
        let b = record(vec![0], vec![0], vec![0], vec![3.0], vec![1.0]);
        let p = predict_functional(&[&a, &b], &[Locator::Observation(0)], 0.05).unwrap();
        assert_eq!(p[0].mean, 2.0);
        assert!((p[0].lower - 1.05).abs() < 1e-12 && (p[0].upper - 2.95).abs() < 1e-12);
    }

    #[test]
    fn prediction_follows_the_sampled_tree() {
        let mut rec = record(
            vec![0, 1],
            vec![0, 1],
            vec![0, 1],
            vec![-1.0, 5.0],
            vec![1.0, 0.0, 0.0, 1.0],
        );
        rec.tree = PyramidTree {
            rules: vec![SplittingRule {
                predictor: 0,
                threshold: 0.0,
            }],
            max_depth: 10,
        };
        let lo = [-0.3];
        let hi = [0.3];
        let p = predict_functional(
            &[&rec],
            &[Locator::Covariates(&lo), Locator::Covariates(&hi)],
            0.05,
        )
        .unwrap();
        assert_eq!((p[0].mean, p[1].mean), (-1.0, 5.0));
    }

    #[test]
    fn rmspe_examples() {
        assert_eq!(rmspe(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmspe(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        assert!((rmspe(&[3.0, 4.0], &[0.0, 0.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-15);
        assert!(rmspe(&[1.0], &[]).is_err());
    }

    #[test]
    fn lpds_examples() {
        let one = record(vec![0], vec![0], vec![0], vec![0.0], vec![1.0]);
        let r = lpds(&[&one], &[0.0], &[Locator::Observation(0)]).unwrap();
        assert!((r.value() + 0.918_938_533_204_672_7).abs() < 1e-12);
        let r2 = lpds(&[&one, &one], &[0.0], &[Locator::Observation(0)]).unwrap();
        assert_eq!(r.value(), r2.value());

        // Two observations, mixture 0.3 N(0,1) + 0.7 N(2,1).
        let mix = record(
            vec![0, 1],
            vec![0, 0],
            vec![0],
            vec![0.0, 2.0],
            vec![0.3, 0.7],
        );
        let y = [0.5, 1.5];
        let r = lpds(
            &[&mix],
            &y,
            &[Locator::Observation(0), Locator::Observation(1)],
        )
        .unwrap();
        let hand: f64 = y
            .iter()
            .map(|&v| {
                (0.3 * gaussian_log_density(v, 0.0, 1.0).exp()
                    + 0.7 * gaussian_log_density(v, 2.0, 1.0).exp())
                .ln()
            })
            .sum();
        assert!((r.value() - hand).abs() < 1e-12);
    }

    #[test]
    fn lpds_reports_zero_density() {
        let mut rec = record(vec![0], vec![0], vec![0], vec![0.0], vec![1.0]);
        rec.atoms = vec![Atom::NegBin { r: 1.0, p: 0.5 }];
        rec.global = None;
        let r = lpds(&[&rec], &[0.5], &[Locator::Observation(0)]).unwrap();
        assert_eq!(r.degenerate, vec![0]);
        assert_eq!(r.value(), f64::NEG_INFINITY);
    }

    #[test]
    fn lpds_drops_when_an_atom_moves_away() {
        let y = [0.0, 1.0];
        let locs = [Locator::Observation(0), Locator::Observation(1)];
        let near = record(
            vec![0, 1],
            vec![0, 0],
            vec![0],
            vec![0.2, 0.8],
            vec![0.5, 0.5],
        );
        let far = record(
            vec![0, 1],
            vec![0, 0],
            vec![0],
            vec![0.2, 3.0],
            vec![0.5, 0.5],
        );
        let a = lpds(&[&near], &y, &locs).unwrap().value();
        let b = lpds(&[&far], &y, &locs).unwrap().value();
        assert!(b <= a);
    }

    #[test]
    fn tree_summary_examples() {
        let rec = record(
            vec![0, 0, 1],
            vec![0, 0, 0],
            vec![0],
            vec![0.0, 1.0],
            vec![0.5, 0.5],
        );
        let s = tree_summaries(&[&rec, &rec]);
        assert_eq!(s.mean.depth, 0.0);
        assert_eq!(s.mean.nonempty_leaves, 1.0);
        assert_eq!(s.mean.nonempty_ocs, 2.0);
        assert_eq!(s.mean.largest_oc, 2.0);
        assert_eq!(s.top_combinations, vec![(vec![], 1.0)]);
        assert_eq!(inclusion_probabilities(&[&rec], 2), vec![0.0, 0.0]);
    }

    #[test]
    fn meaningful_threshold_is_inclusive() {
        assert_eq!(meaningful_threshold(1000), 10);
        assert_eq!(meaningful_threshold(150), 2);
        let mut labels = vec![0u32; 190];
        labels.extend([1, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(labels.len(), 200);
        assert_eq!(meaningful_clusters(&labels), 2);
    }

    #[test]
    fn inclusion_counts_any_level() {
        let mut rec = record(vec![0], vec![0], vec![0], vec![0.0], vec![1.0]);
        rec.tree.rules = vec![
            SplittingRule {
                predictor: 2,
                threshold: 0.0,
            },
            SplittingRule {
                predictor: 0,
                threshold: 0.0,
            },
        ];
        let other = record(vec![0], vec![0], vec![0], vec![0.0], vec![1.0]);
        assert_eq!(
            inclusion_probabilities(&[&rec, &other], 4),
            vec![0.5, 0.0, 0.5, 0.0]
        );
    }

    proptest! {
        #[test]
        fn ari_symmetric_and_relabel_invariant(a in proptest::collection::vec(0u32..4, 2..30), seed in any::<u64>()) {
            let b: Vec<u32> = a.iter().enumerate().map(|(i, v)| (v + (seed >> (i % 60)) as u32 % 3) % 5).collect();
            let relabel: Vec<u32> = b.iter().map(|v| 10 - v).collect();
            let x = ari(&a, &b).unwrap();
            prop_assert!((x - ari(&b, &a).unwrap()).abs() < 1e-12);
            prop_assert!((x - ari(&a, &relabel).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn coclustering_is_a_valid_matrix(parts in proptest::collection::vec(proptest::collection::vec(0u32..3, 6), 1..8)) {
            let m = CoclusteringMatrix::from_partitions(LabelKind::Oc, parts.iter().map(|p| p.as_slice())).unwrap();
            for i in 0..6 {
                prop_assert_eq!(m.get(i, i), 1.0);
                for j in 0..6 {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                    prop_assert!((0.0..=1.0).contains(&m.get(i, j)));
                }
            }
            // Loss of a candidate depends only on its co-membership pattern.
            let relabeled: Vec<u32> = parts[0].iter().map(|v| 7 - v).collect();
            prop_assert!((dahl_loss(&m, &parts[0]).unwrap() - dahl_loss(&m, &relabeled).unwrap()).abs() < 1e-9);
            prop_assert!((dahl_loss(&m, &parts[0]).unwrap() - direct_loss(&m, &parts[0])).abs() < 1e-9);
        }

        #[test]
        fn coclustering_permutes_with_observations(parts in proptest::collection::vec(proptest::collection::vec(0u32..3, 5), 1..6)) {
            let perm = [3usize, 0, 4, 1, 2];
            let permuted: Vec<Vec<u32>> = parts.iter().map(|p| perm.iter().map(|&i| p[i]).collect()).collect();
            let a = CoclusteringMatrix::from_partitions(LabelKind::Oc, parts.iter().map(|p| p.as_slice())).unwrap();
            let b = CoclusteringMatrix::from_partitions(LabelKind::Oc, permuted.iter().map(|p| p.as_slice())).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    prop_assert_eq!(b.get(i, j), a.get(perm[i], perm[j]));
                }
            }
        }
    }
}
