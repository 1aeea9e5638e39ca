//! Pooled posterior summaries of a fitted run.

use capgm_core::inference::{
    self, dahl_for, inclusion_probabilities, lpds, meaningful_clusters, meaningful_threshold,
    pooled, predict_functional, rmspe, tree_summaries, CoclusteringMatrix, DrawSummary, LabelKind,
    Locator, Prediction,
};
use capgm_core::sampler::Method;
use capgm_core::{ChainTrace, Dataset, IterationRecord};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::traces::{moves, MoveCounts, TreeJson};

/// A Dahl partition with 1-based labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionJson {
    pub labels: Vec<u32>,
    pub clusters: usize,
    /// Clusters holding at least `meaningful_threshold` observations.
    pub meaningful: usize,
    /// Position of the chosen draw among the pooled kept draws.
    pub source_draw: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DahlJson {
    pub oc: PartitionJson,
    pub group: PartitionJson,
    pub dc: PartitionJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub predictor: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combination {
    pub predictors: Vec<String>,
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub n: usize,
    pub rmspe: f64,
    /// `None` when some observation has zero predictive density.
    pub lpds: Option<f64>,
    pub lpds_degenerate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAcceptance {
    pub chain: u64,
    pub moves: Vec<MoveCounts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: String,
    pub family: String,
    pub dataset: String,
    pub n: usize,
    pub p: usize,
    pub chains: usize,
    pub draws: usize,
    pub meaningful_threshold: usize,
    pub dahl: DahlJson,
    /// Tree of the draw that supplied the Dahl group partition.
    pub tree_hat: Option<TreeJson>,
    pub inclusion: Vec<Inclusion>,
    pub posterior_means: DrawSummary,
    pub top_combinations: Vec<Combination>,
    pub within_sample: Scores,
    pub test: Option<Scores>,
    pub acceptance: Vec<ChainAcceptance>,
}

/// Everything computed from the pooled draws.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub summary: Summary,
    pub matrices: Vec<CoclusteringMatrix>,
    pub fitted: Vec<Prediction>,
}

fn partition(
    records: &[&IterationRecord],
    kind: LabelKind,
) -> CliResult<(CoclusteringMatrix, PartitionJson)> {
    let (matrix, est) = dahl_for(records, kind).map_err(CliError::from_model)?;
    let canon = inference::canonical(&est.labels);
    let clusters = canon.iter().max().map_or(0, |m| *m as usize + 1);
    Ok((
        matrix,
        PartitionJson {
            meaningful: meaningful_clusters(&canon),
            labels: canon.iter().map(|l| l + 1).collect(),
            clusters,
            source_draw: est.source_iteration,
            loss: est.loss,
        },
    ))
}

/// Locators for rows of `data` scored against a fitted run.
pub fn locators<'a>(
    method: Method,
    data: &'a Dataset,
    groups: Option<&[i64]>,
) -> CliResult<Vec<Locator<'a>>> {
    match method {
        Method::Capgm => Ok((0..data.n)
            .map(|i| Locator::Covariates(data.row(i)))
            .collect()),
        Method::Dp => Ok(vec![Locator::Group(0); data.n]),
        Method::Cam => {
            let g =
                groups.ok_or_else(|| CliError::Data("method cam needs the group column".into()))?;
            Ok(g.iter().map(|&v| Locator::Group((v - 1) as u32)).collect())
        }
    }
}

/// Point predictions with the requested credible `interval` and, when
/// `y` is given, RMSPE and LPDS.
pub fn score(
    records: &[&IterationRecord],
    locs: &[Locator<'_>],
    y: Option<&[f64]>,
    interval: f64,
) -> CliResult<(Vec<Prediction>, Option<Scores>)> {
    let preds = predict_functional(records, locs, 1.0 - interval).map_err(CliError::from_model)?;
    let scores = match y {
        None => None,
        Some(y) => {
            let mean: Vec<f64> = preds.iter().map(|p| p.mean).collect();
            let r = rmspe(y, &mean).map_err(CliError::from_model)?;
            let l = lpds(records, y, locs).map_err(CliError::from_model)?;
            let v = l.value();
            Some(Scores {
                n: y.len(),
                rmspe: r,
                lpds: v.is_finite().then_some(v),
                lpds_degenerate: l.degenerate.len(),
            })
        }
    };
    Ok((preds, scores))
}

/// Test rows handed to [`analyze`].
pub struct TestSet<'a> {
    pub data: &'a Dataset,
    pub groups: Option<&'a [i64]>,
    pub has_response: bool,
}

pub fn analyze(
    traces: &[ChainTrace],
    train: &Dataset,
    predictors: &[String],
    dataset: &str,
    test: Option<TestSet<'_>>,
    interval: f64,
) -> CliResult<Analysis> {
    let first = traces
        .first()
        .ok_or_else(|| CliError::Data("no chains".into()))?;
    let method = first.method;
    let records = pooled(traces);
    if records.is_empty() {
        return Err(CliError::Data("no kept draws".into()));
    }
    let (m_oc, oc) = partition(&records, LabelKind::Oc)?;
    let (m_group, group) = partition(&records, LabelKind::Group)?;
    let (m_dc, dc) = partition(&records, LabelKind::Dc)?;
    let tree_hat =
        (method == Method::Capgm).then(|| TreeJson::from_tree(&records[group.source_draw].tree));
    let ts = tree_summaries(&records);
    let name = |j: usize| {
        predictors
            .get(j)
            .cloned()
            .unwrap_or_else(|| format!("x{}", j + 1))
    };
    let inclusion = inclusion_probabilities(&records, train.p)
        .into_iter()
        .enumerate()
        .map(|(j, probability)| Inclusion {
            predictor: name(j),
            probability,
        })
        .collect();
    let top_combinations = ts
        .top_combinations
        .iter()
        .map(|(k, f)| Combination {
            predictors: k.iter().map(|&j| name(j)).collect(),
            frequency: *f,
        })
        .collect();
    let in_locs: Vec<Locator<'_>> = (0..train.n).map(Locator::Observation).collect();
    let (fitted, within) = score(&records, &in_locs, Some(&train.y), interval)?;
    let test_scores = match test {
        Some(t) if t.has_response => {
            let locs = locators(method, t.data, t.groups)?;
            score(&records, &locs, Some(&t.data.y), interval)?.1
        }
        _ => None,
    };
    let summary = Summary {
        method: method.name().to_string(),
        family: first.family.name().to_string(),
        dataset: dataset.to_string(),
        n: train.n,
        p: train.p,
        chains: traces.len(),
        draws: records.len(),
        meaningful_threshold: meaningful_threshold(train.n),
        dahl: DahlJson { oc, group, dc },
        tree_hat,
        inclusion,
        posterior_means: ts.mean,
        top_combinations,
        within_sample: within.expect("response given"),
        test: test_scores,
        acceptance: traces
            .iter()
            .map(|t| ChainAcceptance {
                chain: t.chain_index,
                moves: moves(&t.move_stats),
            })
            .collect(),
    };
    Ok(Analysis {
        summary,
        matrices: vec![m_oc, m_group, m_dc],
        fitted,
    })
}
