//! Synthetic data for the two simulation designs, with true labels.
//!
//! Predictors are iid `Uniform(-0.5, 0.5)`, responses are Gaussian with unit
//! variance around the atoms `(-Δ, 0, Δ, 2Δ)`. All labels are 0-based.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tree::{PyramidTree, SplittingRule, TreeConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub groups: Vec<u32>,
    pub dcs: Vec<u32>,
    pub ocs: Vec<u32>,
    pub atoms: [f64; 4],
    pub delta: f64,
}

pub fn atoms(delta: f64) -> [f64; 4] {
    [-delta, 0.0, delta, 2.0 * delta]
}

/// Design I group: bit `j` is `x_j >= 0` for the first three predictors.
pub fn sim1_group(x: &[f64]) -> u32 {
    (x[0] >= 0.0) as u32 + 2 * (x[1] >= 0.0) as u32 + 4 * (x[2] >= 0.0) as u32
}

/// Design I distributional cluster of a group.
pub fn sim1_dc(group: u32) -> u32 {
    match group {
        0 | 2 | 4 | 6 => 0,
        1 | 5 => 1,
        3 => 2,
        _ => 3,
    }
}

/// Design II group: bit 0 is `x_1 >= 0`, bit 1 is `x_2 >= 0`.
pub fn sim2_group(x: &[f64]) -> u32 {
    (x[0] >= 0.0) as u32 + 2 * (x[1] >= 0.0) as u32
}

/// Design II distributional cluster of a group.
pub fn sim2_dc(group: u32) -> u32 {
    match group {
        0 => 0,
        2 => 2,
        _ => 1,
    }
}

/// Observational-cluster probabilities of each design II distributional cluster.
pub const SIM2_PI: [[f64; 4]; 3] = [
    [0.40, 0.40, 0.20, 0.00],
    [0.00, 0.50, 0.30, 0.20],
    [0.00, 0.75, 0.10, 0.15],
];

fn truth_tree(levels: usize) -> PyramidTree {
    PyramidTree {
        rules: (0..levels)
            .map(|j| SplittingRule {
                predictor: j,
                threshold: 0.0,
            })
            .collect(),
        max_depth: TreeConfig::default().max_depth,
    }
}

/// Tree whose leaf labels coincide with [`sim1_group`].
pub fn sim1_truth_tree() -> PyramidTree {
    truth_tree(3)
}

/// Tree whose leaf labels coincide with [`sim2_group`].
pub fn sim2_truth_tree() -> PyramidTree {
    truth_tree(2)
}

fn check(n: usize, p: usize, min_p: usize, delta: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("n must be positive".into()));
    }
    if p < min_p {
        return Err(Error::Config(format!(
            "this design needs at least {min_p} predictors, got {p}"
        )));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!(
            "effect size must be finite and non-negative, got {delta}"
        )));
    }
    Ok(())
}

fn uniform_x<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Vec<f64> {
    (0..n * p).map(|_| rng.random::<f64>() - 0.5).collect()
}

fn dataset(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<Dataset> {
    let cfg = TreeConfig::default();
    Dataset::new(y, x, p, cfg.q1, cfg.q2)
}

/// Design I: eight groups from the signs of `x_1..x_3`, four clusters,
/// `C_i = D_{G(x_i)}`.
pub fn generate_sim1<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    delta: f64,
    rng: &mut R,
) -> Result<(Dataset, SimTruth)> {
    check(n, p, 3, delta)?;
    let x = uniform_x(n, p, rng);
    let th = atoms(delta);
    let mut groups = Vec::with_capacity(n);
    let mut dcs = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let g = sim1_group(&x[i * p..(i + 1) * p]);
        let d = sim1_dc(g);
        let z: f64 = StandardNormal.sample(rng);
        groups.push(g);
        dcs.push(d);
        y.push(th[d as usize] + z);
    }
    let truth = SimTruth {
        groups,
        ocs: dcs.clone(),
        dcs,
        atoms: th,
        delta,
    };
    Ok((dataset(y, x, p)?, truth))
}

/// Design II: four groups from the signs of `x_1, x_2`, three distributional
/// clusters and four observational clusters drawn from [`SIM2_PI`].
pub fn generate_sim2<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    delta: f64,
    rng: &mut R,
) -> Result<(Dataset, SimTruth)> {
    check(n, p, 2, delta)?;
    let x = uniform_x(n, p, rng);
    let th = atoms(delta);
    let mut groups = Vec::with_capacity(n);
    let mut dcs = Vec::with_capacity(n);
    let mut ocs = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let g = sim2_group(&x[i * p..(i + 1) * p]);
        let d = sim2_dc(g);
        let c = draw_oc(&SIM2_PI[d as usize], rng);
        let z: f64 = StandardNormal.sample(rng);
        groups.push(g);
        dcs.push(d);
        ocs.push(c);
        y.push(th[c as usize] + z);
    }
    let truth = SimTruth {
        groups,
        dcs,
        ocs,
        atoms: th,
        delta,
    };
    Ok((dataset(y, x, p)?, truth))
}

fn draw_oc<R: Rng + ?Sized>(pi: &[f64; 4], rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (h, &w) in pi.iter().enumerate() {
        acc += w;
        if u < acc {
            return h as u32;
        }
    }
    // Rounding leaves u at most 1e-16 above the total; take the last
    // cluster with positive mass.
    pi.iter().rposition(|&w| w > 0.0).unwrap_or(0) as u32
}

/// Per-cluster response counts of a truth partition, for quick checks.
pub fn cluster_sizes(labels: &[u32], k: usize) -> Vec<usize> {
    let mut out = vec![0; k];
    for &l in labels {
        out[l as usize] += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::chain_rng;

    #[test]
    fn sim1_label_examples() {
        let x = [-0.1, 0.2, 0.3, 0.0];
        let g = sim1_group(&x);
        assert_eq!(g + 1, 7);
        assert_eq!(sim1_dc(g) + 1, 1);
        assert_eq!(sim1_dc(1), 1);
        assert_eq!(sim1_dc(5), 1);
        assert_eq!(sim1_dc(3), 2);
        assert_eq!(sim1_dc(7), 3);
    }

    #[test]
    fn sim2_label_examples() {
        let g = sim2_group(&[0.1, -0.1]);
        assert_eq!((g + 1, sim2_dc(g) + 1), (2, 2));
        assert_eq!(sim2_dc(3) + 1, 2);
        assert_eq!(sim2_dc(0) + 1, 1);
        assert_eq!(sim2_dc(2) + 1, 3);
    }

    #[test]
    fn sim1_is_consistent() {
        let mut rng = chain_rng(11, 0);
        let (data, truth) = generate_sim1(1000, 20, 4.0, &mut rng).unwrap();
        assert_eq!((data.n, data.p), (1000, 20));
        assert_eq!(truth.dcs, truth.ocs);
        let sizes = cluster_sizes(&truth.ocs, 4);
        let expect = [500.0f64, 250.0, 125.0, 125.0];
        for (s, e) in sizes.iter().zip(expect) {
            let p = e / 1000.0;
            let sd = (1000.0 * p * (1.0 - p)).sqrt();
            assert!((*s as f64 - e).abs() < 4.0 * sd, "{sizes:?}");
        }
        assert!(data.x.iter().all(|v| (-0.5..0.5).contains(v)));
    }

    #[test]
    fn sim1_groups_match_the_truth_tree() {
        let mut rng = chain_rng(12, 0);
        let tree = sim1_truth_tree();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            assert_eq!(sim1_group(&x), tree.assign_group(&x));
        }
        let tree2 = sim2_truth_tree();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>() - 0.5).collect();
            assert_eq!(sim2_group(&x), tree2.assign_group(&x));
        }
    }

    #[test]
    fn zero_effect_collapses_the_atoms() {
        let mut rng = chain_rng(13, 0);
        let (data, _) = generate_sim1(4000, 3, 0.0, &mut rng).unwrap();
        let mean = data.y.iter().sum::<f64>() / 4000.0;
        let var = data.y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3999.0;
        assert!(mean.abs() < 0.07 && (var - 1.0).abs() < 0.08);
    }

    #[test]
    fn design_errors() {
        let mut rng = chain_rng(14, 0);
        assert!(generate_sim1(10, 2, 1.0, &mut rng).is_err());
        assert!(generate_sim2(10, 1, 1.0, &mut rng).is_err());
        assert!(generate_sim1(10, 3, -1.0, &mut rng).is_err());
    }

    #[test]
    fn sim2_cluster_frequencies() {
        let mut rng = chain_rng(15, 0);
        let n = 100_000;
        let (_, truth) = generate_sim2(n, 2, 4.0, &mut rng).unwrap();
        for d in 0..3u32 {
            let members: Vec<u32> = truth
                .dcs
                .iter()
                .zip(&truth.ocs)
                .filter(|(dd, _)| **dd == d)
                .map(|(_, c)| *c)
                .collect();
            let m = members.len() as f64;
            let sizes = cluster_sizes(&members, 4);
            for h in 0..4 {
                let p = SIM2_PI[d as usize][h];
                let se = (p * (1.0 - p) / m).sqrt();
                let freq = sizes[h] as f64 / m;
                assert!(
                    (freq - p).abs() <= 3.0 * se + 1e-12,
                    "dc {d} oc {h}: {freq} vs {p}"
                );
            }
        }
        // Group 1 never produces the fourth cluster.
        assert!(truth
            .groups
            .iter()
            .zip(&truth.ocs)
            .all(|(g, c)| !(*g == 0 && *c == 3)));
    }

    #[test]
    fn generators_are_reproducible() {
        let a = generate_sim2(50, 4, 2.0, &mut chain_rng(16, 0)).unwrap();
        let b = generate_sim2(50, 4, 2.0, &mut chain_rng(16, 0)).unwrap();
        assert_eq!(a, b);
    }
}
