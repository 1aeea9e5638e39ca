//! Flat `key = value` run configuration.
//!
//! Lines are `section.key = value`; `#` starts a comment. Every key has a
//! default listed in [`KEYS`], unknown keys are rejected, and relative paths
//! are resolved against the directory of the config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use capgm_core::likelihood::{GaussianPrior, NegBinPrior};
use capgm_core::sampler::Method;
use capgm_core::tree::MoveProbabilities;
use capgm_core::{FamilyPrior, Hyperparameters, SamplerConfig, TreeConfig, TruncationLevels};

use crate::error::{CliError, CliResult};

/// `(key, default, meaning)` for every recognized key. An empty default
/// means "unset".
pub const KEYS: &[(&str, &str, &str)] = &[
    ("model.method", "capgm", "capgm, cam or dp"),
    ("model.family", "gaussian", "gaussian or negbin"),
    ("model.K", "12", "distributional-cluster truncation"),
    ("model.H", "30", "observational-cluster truncation"),
    (
        "priors.a",
        "2",
        "shape of the Gamma prior on alpha (and on the DP concentration)",
    ),
    (
        "priors.b",
        "1.5",
        "rate of the Gamma prior on alpha (and on the DP concentration)",
    ),
    ("priors.c", "1.5", "shape of the Gamma prior on beta"),
    ("priors.d", "2", "rate of the Gamma prior on beta"),
    ("priors.m0", "0", "Gaussian atom prior mean"),
    ("priors.tau2", "100", "Gaussian atom prior variance"),
    (
        "priors.e",
        "1",
        "shape of the inverse-Gamma prior on the shared variance",
    ),
    (
        "priors.f",
        "1",
        "scale of the inverse-Gamma prior on the shared variance",
    ),
    (
        "priors.r_shape",
        "1",
        "shape of the Gamma prior on the negative binomial r",
    ),
    (
        "priors.r_rate",
        "1",
        "rate of the Gamma prior on the negative binomial r",
    ),
    (
        "priors.r_window",
        "0.5",
        "half-width of the uniform random-walk proposal for r",
    ),
    ("tree.a_T", "0.95", "split probability scale"),
    ("tree.b_T", "0.5", "split probability decay with depth"),
    ("tree.max_depth", "10", "maximum tree depth"),
    ("tree.q1", "0.05", "lower quantile of the threshold range"),
    ("tree.q2", "0.95", "upper quantile of the threshold range"),
    ("tree.p_grow", "0.25", "GROW move probability"),
    ("tree.p_prune", "0.25", "PRUNE move probability"),
    ("tree.p_resplit", "0.25", "RE-SPLIT move probability"),
    ("tree.p_change", "0.25", "CHANGE VARIABLE move probability"),
    (
        "mcmc.iterations",
        "10000",
        "sweeps per chain, burn-in included",
    ),
    ("mcmc.burn_in", "5000", "discarded initial sweeps"),
    ("mcmc.thin", "1", "keep every thin-th sweep after burn-in"),
    ("mcmc.seed", "1", "base seed; chain k uses stream k"),
    ("mcmc.chains", "1", "number of chains"),
    ("mcmc.threads", "0", "worker threads, 0 for one per core"),
    ("data.train", "", "training CSV"),
    ("data.test", "", "optional test CSV scored after fitting"),
    ("data.response", "y", "response column"),
    ("data.group", "group", "fixed-group column (cam only)"),
    (
        "data.predictors",
        "",
        "comma-separated predictor columns; default all other columns",
    ),
    (
        "data.label",
        "",
        "dataset name used when summarizing; default the training file stem",
    ),
    ("output.dir", "capgm_out", "output directory"),
    (
        "output.interval",
        "0.95",
        "credible level of prediction intervals",
    ),
];

/// Everything a `fit` needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: Method,
    pub family: FamilyPrior,
    pub trunc: TruncationLevels,
    pub hyper: Hyperparameters,
    pub tree: TreeConfig,
    pub sampler: SamplerConfig,
    pub threads: usize,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub response: String,
    pub group_column: String,
    pub predictors: Option<Vec<String>>,
    pub label: Option<String>,
    pub out: PathBuf,
    pub interval: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_pairs(&BTreeMap::new(), Path::new(".")).expect("defaults are valid")
    }
}

/// Raw key/value pairs with the line each came from.
pub fn parse_pairs(text: &str) -> CliResult<BTreeMap<String, (String, usize)>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {line_no}: expected key = value, got '{line}'"
            )));
        };
        let key = k.trim().to_string();
        if !KEYS.iter().any(|(name, _, _)| *name == key) {
            return Err(CliError::Config(format!(
                "line {line_no}: unknown key '{key}'"
            )));
        }
        if let Some((_, first)) = out.insert(key.clone(), (v.trim().to_string(), line_no)) {
            return Err(CliError::Config(format!(
                "line {line_no}: key '{key}' already set on line {first}"
            )));
        }
    }
    Ok(out)
}

struct Lookup<'a> {
    pairs: &'a BTreeMap<String, (String, usize)>,
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> (&str, String) {
        match self.pairs.get(key) {
            Some((v, line)) => (v.as_str(), format!("line {line}: {key}")),
            None => {
                let default = KEYS.iter().find(|(k, _, _)| *k == key).map(|(_, d, _)| *d);
                (default.expect("key is listed"), format!("default {key}"))
            }
        }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> CliResult<T> {
        let (v, ctx) = self.raw(key);
        v.parse()
            .map_err(|_| CliError::Config(format!("{ctx}: cannot parse '{v}'")))
    }

    fn string(&self, key: &str) -> Option<String> {
        let (v, _) = self.raw(key);
        (!v.is_empty()).then(|| v.to_string())
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_str_with_base(&text, base)
    }

    pub fn from_str_with_base(text: &str, base: &Path) -> CliResult<Self> {
        Self::from_pairs(&parse_pairs(text)?, base)
    }

    fn from_pairs(pairs: &BTreeMap<String, (String, usize)>, base: &Path) -> CliResult<Self> {
        let l = Lookup { pairs };
        let method = match l.raw("model.method").0 {
            "capgm" => Method::Capgm,
            "cam" => Method::Cam,
            "dp" => Method::Dp,
            other => {
                return Err(CliError::Config(format!(
                    "model.method: unknown method '{other}'"
                )))
            }
        };
        let family = match l.raw("model.family").0 {
            "gaussian" => FamilyPrior::Gaussian(GaussianPrior {
                m0: l.parse("priors.m0")?,
                tau2: l.parse("priors.tau2")?,
                e: l.parse("priors.e")?,
                f: l.parse("priors.f")?,
            }),
            "negbin" => FamilyPrior::NegBin(NegBinPrior {
                r_shape: l.parse("priors.r_shape")?,
                r_rate: l.parse("priors.r_rate")?,
                r_window: l.parse("priors.r_window")?,
            }),
            other => {
                return Err(CliError::Config(format!(
                    "model.family: unknown family '{other}'"
                )))
            }
        };
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base.join(p)
            }
        };
        let cfg = RunConfig {
            method,
            family,
            trunc: TruncationLevels {
                k: l.parse("model.K")?,
                h: l.parse("model.H")?,
            },
            hyper: Hyperparameters {
                a: l.parse("priors.a")?,
                b: l.parse("priors.b")?,
                c: l.parse("priors.c")?,
                d: l.parse("priors.d")?,
            },
            tree: TreeConfig {
                a_t: l.parse("tree.a_T")?,
                b_t: l.parse("tree.b_T")?,
                q1: l.parse("tree.q1")?,
                q2: l.parse("tree.q2")?,
                max_depth: l.parse("tree.max_depth")?,
                move_probs: MoveProbabilities {
                    grow: l.parse("tree.p_grow")?,
                    prune: l.parse("tree.p_prune")?,
                    resplit: l.parse("tree.p_resplit")?,
                    change: l.parse("tree.p_change")?,
                },
            },
            sampler: SamplerConfig {
                iterations: l.parse("mcmc.iterations")?,
                burn_in: l.parse("mcmc.burn_in")?,
                thin: l.parse("mcmc.thin")?,
                seed: l.parse("mcmc.seed")?,
                chains: l.parse("mcmc.chains")?,
            },
            threads: l.parse("mcmc.threads")?,
            train: l.string("data.train").map(resolve),
            test: l.string("data.test").map(resolve),
            response: l.string("data.response").unwrap_or_else(|| "y".into()),
            group_column: l.string("data.group").unwrap_or_else(|| "group".into()),
            predictors: l.string("data.predictors").map(|s| {
                s.split(',')
                    .map(|c| c.trim().to_string())
                    .filter(|c| !c.is_empty())
                    .collect()
            }),
            label: l.string("data.label"),
            out: resolve(l.string("output.dir").unwrap_or_else(|| "capgm_out".into())),
            interval: l.parse("output.interval")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let err = CliError::from_model;
        self.family.validate().map_err(err)?;
        self.hyper.validate().map_err(err)?;
        self.sampler.validate().map_err(err)?;
        if self.method != Method::Dp {
            self.trunc.validate().map_err(err)?;
        } else if self.trunc.h < 2 {
            return Err(CliError::Config("model.H must be at least 2".into()));
        }
        if self.method == Method::Capgm {
            self.tree.validate().map_err(err)?;
        }
        if !(self.interval > 0.0 && self.interval < 1.0) {
            return Err(CliError::Config(format!(
                "output.interval must be in (0, 1), got {}",
                self.interval
            )));
        }
        Ok(())
    }

    /// Dataset name for summaries.
    pub fn dataset_label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            self.train
                .as_ref()
                .and_then(|p| p.file_stem())
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".into())
        })
    }
}
