//! End-to-end fit of zero-heavy negative binomial mixture data.

use capgm_core::inference::{ari, dahl_for, pooled, LabelKind};
use capgm_core::likelihood::NegBinPrior;
use capgm_core::rng::chain_rng;
use capgm_core::sampler::Structure;
use capgm_core::{
    run_chain, Dataset, FamilyPrior, Hyperparameters, ModelSpec, SamplerConfig, TreeConfig,
    TruncationLevels,
};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

/// Gamma-Poisson draw with `P(y) ∝ Γ(y+r)/y! p^r (1-p)^y`, mean `r(1-p)/p`.
fn negbin<R: Rng>(r: f64, p: f64, rng: &mut R) -> f64 {
    let lambda = Gamma::new(r, (1.0 - p) / p).unwrap().sample(rng);
    if lambda <= 0.0 {
        return 0.0;
    }
    Poisson::new(lambda).unwrap().sample(rng)
}

#[test]
fn recovers_three_count_clusters() {
    let mut rng = chain_rng(31, 0);
    // (r, p): mean 0.25 (mostly zeros), mean 10, mean 80.
    let comps = [(1.0, 0.8), (5.0, 1.0 / 3.0), (5.0, 5.0 / 85.0)];
    let n = 300;
    let p = 3;
    let x: Vec<f64> = (0..n * p).map(|_| rng.random::<f64>() - 0.5).collect();
    let truth: Vec<u32> = (0..n)
        .map(|i| match (x[i * p] >= 0.0, x[i * p + 1] >= 0.0) {
            (false, _) => 0,
            (true, false) => 1,
            (true, true) => 2,
        })
        .collect();
    let y: Vec<f64> = truth
        .iter()
        .map(|&k| negbin(comps[k as usize].0, comps[k as usize].1, &mut rng))
        .collect();
    let zeros = y.iter().filter(|&&v| v == 0.0).count();
    assert!(zeros as f64 > 0.25 * n as f64, "{zeros} zeros");
    let data = Dataset::new(y, x, p, 0.05, 0.95).unwrap();
    let spec = ModelSpec {
        structure: Structure::Pyramid(TreeConfig::default()),
        family: FamilyPrior::NegBin(NegBinPrior {
            r_shape: 2.0,
            r_rate: 0.5,
            r_window: 0.5,
        }),
        trunc: TruncationLevels { k: 6, h: 10 },
        hyper: Hyperparameters::default(),
    };
    let cfg = SamplerConfig {
        iterations: 4000,
        burn_in: 2000,
        ..SamplerConfig::default()
    };
    let trace = run_chain(&data, &spec, &cfg, 0, chain_rng(31, 1)).unwrap();
    let (accepted, proposed) = trace.r_moves.map(|(p, a)| (a, p)).unwrap();
    assert!(accepted > 0 && accepted < proposed);
    let records = pooled(std::slice::from_ref(&trace));
    let (_, est) = dahl_for(&records, LabelKind::Oc).unwrap();
    let score = ari(&est.labels, &truth).unwrap();
    assert!(score >= 0.8, "ARI {score}");
}
