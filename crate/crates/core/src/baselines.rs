//! Reference samplers: the truncated DP mixture (covariates ignored) and the
//! common atoms model with known groups.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::FamilyPrior;
use crate::sampler::{run_chain, ChainTrace, ModelSpec, SamplerConfig, Structure};
use crate::sticks::{Hyperparameters, TruncationLevels};

/// User-supplied group labels, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixedGrouping {
    pub labels: Vec<u32>,
    pub num_groups: usize,
}

impl FixedGrouping {
    /// Build from 0-based labels; `G` is the largest label plus one.
    pub fn from_zero_based(labels: Vec<u32>) -> Result<Self> {
        let g = labels
            .iter()
            .max()
            .map(|&m| m as usize + 1)
            .ok_or_else(|| Error::Empty("grouping has no labels".into()))?;
        Ok(FixedGrouping {
            labels,
            num_groups: g,
        })
    }

    /// Build from 1-based labels as found in data files.
    pub fn from_one_based(labels: &[i64]) -> Result<Self> {
        let mut out = Vec::with_capacity(labels.len());
        for (i, &l) in labels.iter().enumerate() {
            if l < 1 || l > u32::MAX as i64 {
                return Err(Error::domain(format!(
                    "group label {l} at row {} is not in 1..G",
                    i + 1
                )));
            }
            out.push((l - 1) as u32);
        }
        Self::from_zero_based(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_groups == 0 || self.labels.is_empty() {
            return Err(Error::Empty("grouping has no groups".into()));
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l as usize >= self.num_groups) {
            return Err(Error::domain(format!(
                "group label {} exceeds G = {}",
                bad + 1,
                self.num_groups
            )));
        }
        Ok(())
    }
}

/// Hyperparameters for the DP: the concentration γ gets the `Gamma(a, b)`
/// prior of α, and the sampler updates it in the slot of β.
pub fn dp_hyperparameters(hyper: &Hyperparameters) -> Hyperparameters {
    Hyperparameters {
        a: hyper.a,
        b: hyper.b,
        c: hyper.a,
        d: hyper.b,
    }
}

/// Blocked-Gibbs truncated DP mixture with `H` components. Predictors are
/// never read.
pub fn run_dp_chain<R: Rng>(
    data: &Dataset,
    family: FamilyPrior,
    h: usize,
    hyper: &Hyperparameters,
    cfg: &SamplerConfig,
    chain_index: u64,
    rng: R,
) -> Result<ChainTrace> {
    let spec = ModelSpec {
        structure: Structure::Single,
        family,
        trunc: TruncationLevels { k: 1, h },
        hyper: dp_hyperparameters(hyper),
    };
    run_chain(data, &spec, cfg, chain_index, rng)
}

/// Common atoms model: the CAPGM sweep with the tree step removed and groups
/// fixed to `grouping`.
#[allow(clippy::too_many_arguments)]
pub fn run_cam_chain<R: Rng>(
    data: &Dataset,
    grouping: &FixedGrouping,
    family: FamilyPrior,
    trunc: TruncationLevels,
    hyper: &Hyperparameters,
    cfg: &SamplerConfig,
    chain_index: u64,
    rng: R,
) -> Result<ChainTrace> {
    grouping.validate()?;
    let spec = ModelSpec {
        structure: Structure::Fixed(grouping.clone()),
        family,
        trunc,
        hyper: *hyper,
    };
    run_chain(data, &spec, cfg, chain_index, rng)
}
