//! The four subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use capgm_core::baselines::{dp_hyperparameters, FixedGrouping};
use capgm_core::inference::{ari, CoclusteringMatrix, Prediction};
use capgm_core::rng::chain_rng;
use capgm_core::sampler::{Method, Structure};
use capgm_core::simgen::{generate_sim1, generate_sim2};
use capgm_core::{
    run_chain, ChainTrace, Dataset, IterationRecord, ModelSpec, SamplerConfig, TruncationLevels,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::csvio::{load_dataset, read_truth, write_dataset, write_truth, LoadedData};
use crate::error::{CliError, CliResult};
use crate::report::{analyze, locators, score, Scores, Summary, TestSet};
use crate::traces::{chain_dirs, read_chain, write_chain};

/// Synthetic study to generate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    Sim1,
    Sim2,
}

impl std::str::FromStr for Study {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sim1" => Ok(Study::Sim1),
            "sim2" => Ok(Study::Sim2),
            other => Err(format!("unknown study '{other}' (expected sim1 or sim2)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    pub study: Study,
    pub n: usize,
    pub p: usize,
    pub delta: f64,
    pub seed: u64,
    /// Size of an independent test set, 0 for none.
    pub test_n: usize,
    pub out: PathBuf,
}

/// Writes `data.csv` and `truth.csv` (plus `test.csv` and `test_truth.csv`
/// when `test_n > 0`) and returns the paths written.
pub fn simulate(args: &SimulateArgs) -> CliResult<Vec<PathBuf>> {
    if args.delta.is_nan() || args.delta <= 0.0 {
        return Err(CliError::Config(format!(
            "delta must be positive, got {}",
            args.delta
        )));
    }
    if args.n == 0 {
        return Err(CliError::Config("n must be positive".into()));
    }
    let generate = |n: usize, stream: u64| {
        let mut rng = chain_rng(args.seed, stream);
        match args.study {
            Study::Sim1 => generate_sim1(n, args.p, args.delta, &mut rng),
            Study::Sim2 => generate_sim2(n, args.p, args.delta, &mut rng),
        }
        .map_err(CliError::from_model)
    };
    let mut written = Vec::new();
    let mut emit = |n: usize, stream: u64, data_name: &str, truth_name: &str| -> CliResult<()> {
        let (data, truth) = generate(n, stream)?;
        let dp = args.out.join(data_name);
        let tp = args.out.join(truth_name);
        write_dataset(&dp, &data)?;
        write_truth(&tp, &truth)?;
        written.push(dp);
        written.push(tp);
        Ok(())
    };
    emit(args.n, 0, "data.csv", "truth.csv")?;
    if args.test_n > 0 {
        emit(args.test_n, 1, "test.csv", "test_truth.csv")?;
    }
    Ok(written)
}

/// The model implied by a config and a loaded training set.
pub fn model_spec(cfg: &RunConfig, data: &LoadedData) -> CliResult<ModelSpec> {
    let spec = match cfg.method {
        Method::Capgm => ModelSpec {
            structure: Structure::Pyramid(cfg.tree),
            family: cfg.family,
            trunc: cfg.trunc,
            hyper: cfg.hyper,
        },
        Method::Cam => {
            let g = data
                .groups
                .as_ref()
                .ok_or_else(|| CliError::Data("method cam needs the group column".into()))?;
            ModelSpec {
                structure: Structure::Fixed(
                    FixedGrouping::from_one_based(g).map_err(CliError::from_model)?,
                ),
                family: cfg.family,
                trunc: cfg.trunc,
                hyper: cfg.hyper,
            }
        }
        Method::Dp => ModelSpec {
            structure: Structure::Single,
            family: cfg.family,
            trunc: TruncationLevels {
                k: 1,
                h: cfg.trunc.h,
            },
            hyper: dp_hyperparameters(&cfg.hyper),
        },
    };
    spec.validate().map_err(CliError::from_model)?;
    Ok(spec)
}

/// Run every chain on a pool of `threads` workers (0 means one per core).
/// Chain `k` always uses stream `k` of `sampler.seed`, so results do not
/// depend on the thread count.
pub fn run_chains_parallel(
    data: &Dataset,
    spec: &ModelSpec,
    sampler: &SamplerConfig,
    threads: usize,
) -> CliResult<Vec<ChainTrace>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        (0..sampler.chains as u64)
            .into_par_iter()
            .map(|k| {
                run_chain(data, spec, sampler, k, chain_rng(sampler.seed, k))
                    .map_err(|e| CliError::from_chain(k, e))
            })
            .collect()
    })
}

/// What `fit` records about a run so that `predict` and `summarize` can
/// reload it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub method: String,
    pub family: String,
    pub dataset: String,
    pub train: PathBuf,
    pub test: Option<PathBuf>,
    pub response: String,
    pub group_column: String,
    pub predictors: Vec<String>,
    pub max_depth: usize,
    pub q1: f64,
    pub q2: f64,
    pub interval: f64,
    pub sampler: SamplerConfig,
}

impl RunMeta {
    fn method(&self) -> CliResult<Method> {
        match self.method.as_str() {
            "capgm" => Ok(Method::Capgm),
            "cam" => Ok(Method::Cam),
            "dp" => Ok(Method::Dp),
            other => Err(CliError::Data(format!(
                "run.json: unknown method '{other}'"
            ))),
        }
    }

    /// Config that reloads data the way the run saw it.
    fn data_config(&self) -> CliResult<RunConfig> {
        let mut cfg = RunConfig {
            method: self.method()?,
            response: self.response.clone(),
            group_column: self.group_column.clone(),
            ..RunConfig::default()
        };
        cfg.tree.q1 = self.q1;
        cfg.tree.q2 = self.q2;
        Ok(cfg)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("cannot serialize {}: {e}", path.display())))?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_matrix(path: &Path, m: &CoclusteringMatrix) -> CliResult<()> {
    let mut s = String::with_capacity(m.n * m.n * 8);
    for i in 1..=m.n {
        if i > 1 {
            s.push(',');
        }
        let _ = write!(s, "{i}");
    }
    s.push('\n');
    for i in 0..m.n {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v}");
        }
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

/// Result of a `fit`.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub traces: Vec<ChainTrace>,
    pub summary: Summary,
    pub out: PathBuf,
}

/// Load data, run the chains, then write traces, `run.json`,
/// `summary.json` and the co-clustering matrices under `cfg.out`.
pub fn fit(cfg: &RunConfig) -> CliResult<FitOutcome> {
    cfg.validate()?;
    let train_path = cfg
        .train
        .as_ref()
        .ok_or_else(|| CliError::Config("data.train is not set".into()))?;
    let train = load_dataset(train_path, cfg, None, true)?;
    let test = cfg
        .test
        .as_ref()
        .map(|p| load_dataset(p, cfg, Some(&train.predictors), false))
        .transpose()?;
    let spec = model_spec(cfg, &train)?;
    let traces = run_chains_parallel(&train.dataset, &spec, &cfg.sampler, cfg.threads)?;
    let dataset = cfg.dataset_label();
    let analysis = analyze(
        &traces,
        &train.dataset,
        &train.predictors,
        &dataset,
        test.as_ref().map(|t| TestSet {
            data: &t.dataset,
            groups: t.groups.as_deref(),
            has_response: t.has_response,
        }),
        cfg.interval,
    )?;

    let out = &cfg.out;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    for t in &traces {
        write_chain(out, t)?;
    }
    let meta = RunMeta {
        method: cfg.method.name().to_string(),
        family: cfg.family.family().name().to_string(),
        dataset,
        train: fs::canonicalize(train_path).unwrap_or_else(|_| train_path.clone()),
        test: cfg
            .test
            .as_ref()
            .map(|p| fs::canonicalize(p).unwrap_or_else(|_| p.clone())),
        response: cfg.response.clone(),
        group_column: cfg.group_column.clone(),
        predictors: train.predictors.clone(),
        max_depth: cfg.tree.max_depth,
        q1: cfg.tree.q1,
        q2: cfg.tree.q2,
        interval: cfg.interval,
        sampler: cfg.sampler,
    };
    write_json(&out.join("run.json"), &meta)?;
    write_json(&out.join("summary.json"), &analysis.summary)?;
    for m in &analysis.matrices {
        write_matrix(&out.join(format!("coclust_{}.csv", m.kind.name())), m)?;
    }
    write_predictions(&out.join("fitted.csv"), &analysis.fitted)?;
    Ok(FitOutcome {
        traces,
        summary: analysis.summary,
        out: out.clone(),
    })
}

fn write_predictions(path: &Path, preds: &[Prediction]) -> CliResult<()> {
    let mut s = String::from("row,mean,lower,upper\n");
    for (i, p) in preds.iter().enumerate() {
        let _ = writeln!(s, "{},{},{},{}", i + 1, p.mean, p.lower, p.upper);
    }
    fs::write(path, s).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub predictions: Vec<Prediction>,
    pub scores: Option<Scores>,
    pub predictions_path: PathBuf,
    pub scores_path: Option<PathBuf>,
}

/// Score `test` against the draws stored in `run_dir`. Writes
/// `predictions.csv` and, when the test file has the response,
/// `predictions.scores.json`, both into `out` (default `run_dir`).
pub fn predict(run_dir: &Path, test: &Path, out: Option<&Path>) -> CliResult<PredictOutcome> {
    let meta: RunMeta = read_json(&run_dir.join("run.json"))?;
    let cfg = meta.data_config()?;
    let data = load_dataset(test, &cfg, Some(&meta.predictors), false)?;
    let records = read_records(run_dir, &meta)?;
    let refs: Vec<_> = records.iter().collect();
    if let Some(bad) = refs
        .iter()
        .flat_map(|r| &r.tree.rules)
        .find(|r| r.predictor >= data.dataset.p)
    {
        return Err(CliError::Data(format!(
            "traces split on predictor {} but the test file has {} predictors",
            bad.predictor + 1,
            data.dataset.p
        )));
    }
    let locs = locators(cfg.method, &data.dataset, data.groups.as_deref())?;
    let y = data.has_response.then_some(data.dataset.y.as_slice());
    let (predictions, scores) = score(&refs, &locs, y, meta.interval)?;
    let out = out.unwrap_or(run_dir);
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let predictions_path = out.join("predictions.csv");
    write_predictions(&predictions_path, &predictions)?;
    let scores_path = match &scores {
        Some(s) => {
            let p = out.join("predictions.scores.json");
            write_json(&p, s)?;
            Some(p)
        }
        None => None,
    };
    Ok(PredictOutcome {
        predictions,
        scores,
        predictions_path,
        scores_path,
    })
}

/// Per-run numbers that `summarize` aggregates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    pub rmspe_in: Option<f64>,
    pub rmspe_out: Option<f64>,
    pub lpds_in: Option<f64>,
    pub lpds_out: Option<f64>,
    pub ari_oc: Option<f64>,
    pub ari_group: Option<f64>,
    pub ari_dc: Option<f64>,
    pub meaningful_ocs: Option<f64>,
    pub depth: Option<f64>,
    pub groups: Option<f64>,
    pub dcs: Option<f64>,
}

pub const METRICS: [&str; 11] = [
    "rmspe_in",
    "rmspe_out",
    "lpds_in",
    "lpds_out",
    "ari_oc",
    "ari_group",
    "ari_dc",
    "meaningful_ocs",
    "depth",
    "groups",
    "dcs",
];

impl RunMetrics {
    pub fn values(&self) -> [Option<f64>; 11] {
        [
            self.rmspe_in,
            self.rmspe_out,
            self.lpds_in,
            self.lpds_out,
            self.ari_oc,
            self.ari_group,
            self.ari_dc,
            self.meaningful_ocs,
            self.depth,
            self.groups,
            self.dcs,
        ]
    }

    /// Metrics of one run; ARI columns need `truth`.
    pub fn from_summary(s: &Summary, truth: Option<&crate::csvio::TruthLabels>) -> CliResult<Self> {
        let zero_based =
            |p: &crate::report::PartitionJson| p.labels.iter().map(|l| l - 1).collect::<Vec<u32>>();
        let ari_vs =
            |est: &crate::report::PartitionJson, t: Option<&Vec<u32>>| -> CliResult<Option<f64>> {
                match t {
                    Some(t) if t.len() == est.labels.len() => ari(&zero_based(est), t)
                        .map(Some)
                        .map_err(CliError::from_model),
                    Some(t) => Err(CliError::Data(format!(
                        "truth has {} rows but the run has {} observations",
                        t.len(),
                        est.labels.len()
                    ))),
                    None => Ok(None),
                }
            };
        let tree_method = s.method == Method::Capgm.name();
        let grouped = s.method != Method::Dp.name();
        Ok(RunMetrics {
            rmspe_in: Some(s.within_sample.rmspe),
            lpds_in: s.within_sample.lpds,
            rmspe_out: s.test.as_ref().map(|t| t.rmspe),
            lpds_out: s.test.as_ref().and_then(|t| t.lpds),
            ari_oc: ari_vs(&s.dahl.oc, truth.and_then(|t| t.oc.as_ref()))?,
            ari_group: if grouped {
                ari_vs(&s.dahl.group, truth.and_then(|t| t.group.as_ref()))?
            } else {
                None
            },
            ari_dc: if grouped {
                ari_vs(&s.dahl.dc, truth.and_then(|t| t.dc.as_ref()))?
            } else {
                None
            },
            meaningful_ocs: Some(s.dahl.oc.meaningful as f64),
            depth: tree_method.then_some(s.posterior_means.depth),
            groups: grouped.then_some(s.posterior_means.nonempty_leaves),
            dcs: grouped.then_some(s.posterior_means.dcs),
        })
    }
}

/// Mean and standard error; the error is `None` for fewer than two values.
pub fn mean_se(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}

/// Build the comparison table over fitted runs. ARI uses `truth` when
/// given (it must exist), otherwise a `truth.csv` beside each run's
/// training file if there is one.
pub fn summarize(run_dirs: &[PathBuf], truth: Option<&Path>) -> CliResult<String> {
    if run_dirs.is_empty() {
        return Err(CliError::Config(
            "summarize needs at least one run directory".into(),
        ));
    }
    if let Some(t) = truth {
        if !t.is_file() {
            return Err(CliError::Data(format!(
                "truth file {} not found",
                t.display()
            )));
        }
    }
    let mut groups: BTreeMap<(String, String), Vec<RunMetrics>> = BTreeMap::new();
    for dir in run_dirs {
        let meta: RunMeta = read_json(&dir.join("run.json"))?;
        let s: Summary = read_json(&dir.join("summary.json"))?;
        let truth_path = match truth {
            Some(t) => Some(t.to_path_buf()),
            None => meta
                .train
                .parent()
                .map(|d| d.join("truth.csv"))
                .filter(|p| p.is_file()),
        };
        let labels = truth_path.as_deref().map(read_truth).transpose()?;
        let m = RunMetrics::from_summary(&s, labels.as_ref())?;
        groups
            .entry((s.method.clone(), s.dataset.clone()))
            .or_default()
            .push(m);
    }
    let mut out = String::from("method,dataset,runs");
    for name in METRICS {
        let _ = write!(out, ",{name}_mean,{name}_se");
    }
    out.push('\n');
    for ((method, dataset), runs) in &groups {
        let _ = write!(out, "{method},{dataset},{}", runs.len());
        for j in 0..METRICS.len() {
            let vals: Vec<f64> = runs.iter().filter_map(|r| r.values()[j]).collect();
            if vals.is_empty() {
                out.push_str(",,");
                continue;
            }
            let (mean, se) = mean_se(&vals);
            let _ = write!(out, ",{mean},");
            if let Some(se) = se {
                let _ = write!(out, "{se}");
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Pooled draws of a fitted run, read back from its trace files.
pub fn load_run_records(run_dir: &Path) -> CliResult<Vec<IterationRecord>> {
    read_records(run_dir, &read_json(&run_dir.join("run.json"))?)
}

fn read_records(run_dir: &Path, meta: &RunMeta) -> CliResult<Vec<IterationRecord>> {
    let mut records = Vec::new();
    for dir in chain_dirs(run_dir)? {
        records.extend(read_chain(&dir, meta.max_depth)?);
    }
    Ok(records)
}
