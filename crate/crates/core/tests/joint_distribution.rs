//! Joint-distribution (Geweke) test: alternating sampler sweeps with fresh
//! responses drawn given the state must preserve the prior marginals.

mod common;

use capgm_core::likelihood::{sample_inv_gamma, GaussianModel, GaussianPrior, NegBinPrior};
use capgm_core::rng::{chain_rng, ChainRng};
use capgm_core::sampler::{Chain, ModelSpec, Structure};
use capgm_core::sticks::{StickVariables, StickWeights};
use capgm_core::tree::sample_tree_prior;
use capgm_core::{
    Atom, Dataset, FamilyPrior, Hyperparameters, LikelihoodModel, TreeConfig, TruncationLevels,
};
use common::ks_two_sample;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

const N: usize = 8;

fn spec(family: FamilyPrior) -> ModelSpec {
    ModelSpec {
        structure: Structure::Pyramid(TreeConfig {
            max_depth: 2,
            ..TreeConfig::default()
        }),
        family,
        trunc: TruncationLevels { k: 3, h: 4 },
        hyper: Hyperparameters::default(),
    }
}

fn categorical(w: &[f64], rng: &mut ChainRng) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in w.iter().enumerate() {
        acc += p;
        if u < acc {
            return i as u32;
        }
    }
    (w.len() - 1) as u32
}

/// Overwrite every latent block of `chain` with a draw from the prior.
fn draw_prior(chain: &mut Chain<'_, ChainRng>, rng: &mut ChainRng) {
    let spec = chain.spec.clone();
    let Structure::Pyramid(cfg) = spec.structure else {
        unreachable!()
    };
    let h = spec.hyper;
    let st = &mut chain.state;
    st.alpha = Gamma::new(h.a, 1.0 / h.b).unwrap().sample(rng);
    st.beta = Gamma::new(h.c, 1.0 / h.d).unwrap().sample(rng);
    st.sticks = StickVariables::sample_prior(spec.trunc, st.alpha, st.beta, rng).unwrap();
    st.weights = StickWeights::from_sticks(&st.sticks).unwrap();
    chain.tree = sample_tree_prior(&cfg, &chain.data.bounds, rng).unwrap();
    chain.groups = chain.tree.assign_groups(chain.data);
    chain.num_groups = chain.tree.num_groups();
    st.d = (0..chain.num_groups)
        .map(|_| categorical(&st.weights.rho, rng))
        .collect();
    st.c = chain
        .groups
        .iter()
        .map(|&g| categorical(st.weights.nu_row(st.d[g as usize] as usize), rng))
        .collect();
    chain.model = match spec.family {
        FamilyPrior::Gaussian(gp) => {
            let base = Normal::new(gp.m0, gp.tau2.sqrt()).unwrap();
            LikelihoodModel::Gaussian(GaussianModel {
                prior: gp,
                atoms: (0..spec.trunc.h).map(|_| base.sample(rng)).collect(),
                phi: sample_inv_gamma(gp.e, gp.f, rng).unwrap(),
            })
        }
        nb @ FamilyPrior::NegBin(_) => LikelihoodModel::from_prior(&nb, spec.trunc.h, rng).unwrap(),
    };
    chain.refresh_counts();
}

fn regenerate_y(chain: &mut Chain<'_, ChainRng>, rng: &mut ChainRng) {
    match &chain.model {
        LikelihoodModel::Gaussian(m) => {
            let sd = m.phi.sqrt();
            for (y, &c) in chain.y.iter_mut().zip(&chain.state.c) {
                *y = Normal::new(m.atoms[c as usize], sd).unwrap().sample(rng);
            }
        }
        LikelihoodModel::NegBin(m) => {
            // Gamma-Poisson mixture with mean r (1 - p) / p.
            for (y, &c) in chain.y.iter_mut().zip(&chain.state.c) {
                let (r, p) = m.atoms[c as usize];
                let lambda = Gamma::new(r, (1.0 - p) / p).unwrap().sample(rng);
                *y = if lambda > 0.0 {
                    Poisson::new(lambda).unwrap().sample(rng)
                } else {
                    0.0
                };
            }
        }
    }
}

#[derive(Default)]
struct Stats {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    clusters: Vec<f64>,
    depth: Vec<f64>,
    first_atom: Vec<f64>,
}

impl Stats {
    fn push(&mut self, chain: &Chain<'_, ChainRng>) {
        self.alpha.push(chain.state.alpha);
        self.beta.push(chain.state.beta);
        let mut c = chain.state.c.clone();
        c.sort_unstable();
        c.dedup();
        self.clusters.push(c.len() as f64);
        self.depth.push(chain.tree.depth() as f64);
        self.first_atom.push(match chain.model.atom(0) {
            Atom::Normal { mean } => mean,
            Atom::NegBin { r, .. } => r,
        });
    }
}

fn check_family(family: FamilyPrior, seed: u64, thin: usize) {
    let mut xr = chain_rng(seed, 0);
    let x: Vec<f64> = (0..N * 2).map(|_| xr.random::<f64>() - 0.5).collect();
    let data = Dataset::new(vec![0.0; N], x, 2, 0.05, 0.95).unwrap();
    let draws = 10_000;

    let mut rng = chain_rng(seed, 1);
    let mut chain = Chain::new(&data, spec(family), chain_rng(seed, 2)).unwrap();
    let mut marginal = Stats::default();
    for _ in 0..draws {
        draw_prior(&mut chain, &mut rng);
        marginal.push(&chain);
    }

    let mut chain = Chain::new(&data, spec(family), chain_rng(seed, 3)).unwrap();
    draw_prior(&mut chain, &mut rng);
    regenerate_y(&mut chain, &mut rng);
    let mut successive = Stats::default();
    for _ in 0..draws {
        for _ in 0..thin {
            chain.sweep().unwrap();
            regenerate_y(&mut chain, &mut rng);
        }
        successive.push(&chain);
    }

    for (name, a, b) in [
        ("alpha", &marginal.alpha, &successive.alpha),
        ("beta", &marginal.beta, &successive.beta),
        ("clusters", &marginal.clusters, &successive.clusters),
        ("depth", &marginal.depth, &successive.depth),
        ("first atom", &marginal.first_atom, &successive.first_atom),
    ] {
        let (d, p) = ks_two_sample(a, b);
        assert!(
            p > 0.01,
            "{}: {name}: KS D = {d:.4}, p = {p:.4}",
            family.family().name()
        );
    }
}

#[test]
fn gaussian_sweeps_preserve_the_prior() {
    // A tight base measure keeps the atom chain's random walk short
    // relative to the thinning interval.
    let prior = GaussianPrior {
        tau2: 1.0,
        ..GaussianPrior::default()
    };
    check_family(FamilyPrior::Gaussian(prior), 100, 20);
}

#[test]
fn negbin_sweeps_preserve_the_prior() {
    // The r_h random walk mixes slowly, hence the longer gap.
    check_family(FamilyPrior::NegBin(NegBinPrior::default()), 200, 60);
}
