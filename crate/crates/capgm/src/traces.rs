//! Per-chain trace files.
//!
//! `<out>/chain_<k>/` holds
//! - `trace.oc.csv` and `trace.group.csv`: one row per kept iteration, the
//!   iteration number followed by one 1-based label per observation;
//! - `trace.params.jsonl`: one JSON object per kept iteration with the tree
//!   (1-based predictors), the 1-based `D` vector, atoms, the shared
//!   parameter, `alpha`, `beta`, `rho`, `nu` and the log-likelihood;
//! - `acceptance.json`: tree-move and `r` update counts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use capgm_core::sampler::MoveStats;
use capgm_core::tree::MoveKind;
use capgm_core::{Atom, ChainTrace, IterationRecord, PyramidTree, SplittingRule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const LABELING: &str = "binary-path-1based";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleJson {
    pub predictor: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeJson {
    pub depth: usize,
    pub rules: Vec<RuleJson>,
    pub labeling: String,
}

impl TreeJson {
    pub fn from_tree(tree: &PyramidTree) -> Self {
        TreeJson {
            depth: tree.depth(),
            rules: tree
                .rules
                .iter()
                .map(|r| RuleJson {
                    predictor: r.predictor + 1,
                    threshold: r.threshold,
                })
                .collect(),
            labeling: LABELING.to_string(),
        }
    }

    pub fn to_tree(&self, max_depth: usize) -> CliResult<PyramidTree> {
        if self.rules.len() != self.depth || self.rules.iter().any(|r| r.predictor == 0) {
            return Err(CliError::Data(format!("malformed tree record: {self:?}")));
        }
        Ok(PyramidTree {
            rules: self
                .rules
                .iter()
                .map(|r| SplittingRule {
                    predictor: r.predictor - 1,
                    threshold: r.threshold,
                })
                .collect(),
            max_depth: max_depth.max(self.depth),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AtomJson {
    Normal { mean: f64 },
    NegBin { r: f64, p: f64 },
}

impl From<Atom> for AtomJson {
    fn from(a: Atom) -> Self {
        match a {
            Atom::Normal { mean } => AtomJson::Normal { mean },
            Atom::NegBin { r, p } => AtomJson::NegBin { r, p },
        }
    }
}

impl From<AtomJson> for Atom {
    fn from(a: AtomJson) -> Self {
        match a {
            AtomJson::Normal { mean } => Atom::Normal { mean },
            AtomJson::NegBin { r, p } => Atom::NegBin { r, p },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub iteration: usize,
    pub tree: TreeJson,
    pub d: Vec<u32>,
    pub atoms: Vec<AtomJson>,
    pub global: Option<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub rho: Vec<f64>,
    pub nu: Vec<Vec<f64>>,
    pub log_likelihood: Option<f64>,
}

impl ParamsJson {
    pub fn from_record(rec: &IterationRecord) -> Self {
        let h = rec.h();
        ParamsJson {
            iteration: rec.iteration,
            tree: TreeJson::from_tree(&rec.tree),
            d: rec.d.iter().map(|&k| k + 1).collect(),
            atoms: rec.atoms.iter().map(|&a| a.into()).collect(),
            global: rec.global,
            alpha: rec.alpha,
            beta: rec.beta,
            rho: rec.rho.clone(),
            nu: rec.nu.chunks(h.max(1)).map(<[f64]>::to_vec).collect(),
            log_likelihood: rec.log_likelihood.is_finite().then_some(rec.log_likelihood),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub kind: String,
    pub proposed: u64,
    pub accepted: u64,
    pub auto_rejected: u64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateCounts {
    pub proposed: u64,
    pub accepted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceJson {
    pub method: String,
    pub family: String,
    pub chain: u64,
    pub moves: Vec<MoveCounts>,
    pub r_updates: Option<UpdateCounts>,
}

impl AcceptanceJson {
    pub fn from_trace(t: &ChainTrace) -> Self {
        AcceptanceJson {
            method: t.method.name().to_string(),
            family: t.family.name().to_string(),
            chain: t.chain_index,
            moves: moves(&t.move_stats),
            r_updates: t
                .r_moves
                .map(|(proposed, accepted)| UpdateCounts { proposed, accepted }),
        }
    }
}

pub fn moves(stats: &MoveStats) -> Vec<MoveCounts> {
    MoveKind::ALL
        .iter()
        .map(|&k| {
            let i = k as usize;
            MoveCounts {
                kind: k.name().to_string(),
                proposed: stats.proposed[i],
                accepted: stats.accepted[i],
                auto_rejected: stats.auto_rejected[i],
                rate: stats.acceptance_rate(k),
            }
        })
        .collect()
}

pub fn chain_dir(out: &Path, chain: u64) -> PathBuf {
    out.join(format!("chain_{chain}"))
}

fn label_rows(
    records: &[IterationRecord],
    n: usize,
    pick: impl Fn(&IterationRecord) -> &[u32],
) -> String {
    let mut s = String::from("iteration");
    for i in 1..=n {
        let _ = write!(s, ",{i}");
    }
    s.push('\n');
    for rec in records {
        let _ = write!(s, "{}", rec.iteration);
        for &l in pick(rec) {
            let _ = write!(s, ",{}", l + 1);
        }
        s.push('\n');
    }
    s
}

/// The four trace files of a chain, as `(file name, contents)`.
pub fn render_chain(trace: &ChainTrace) -> CliResult<Vec<(&'static str, String)>> {
    let n = trace.records.first().map_or(0, |r| r.c.len());
    let json = |e: serde_json::Error| CliError::Data(format!("cannot serialize trace: {e}"));
    let mut params = String::new();
    for rec in &trace.records {
        params.push_str(&serde_json::to_string(&ParamsJson::from_record(rec)).map_err(json)?);
        params.push('\n');
    }
    let acceptance =
        serde_json::to_string_pretty(&AcceptanceJson::from_trace(trace)).map_err(json)? + "\n";
    Ok(vec![
        ("trace.oc.csv", label_rows(&trace.records, n, |r| &r.c)),
        (
            "trace.group.csv",
            label_rows(&trace.records, n, |r| &r.groups),
        ),
        ("trace.params.jsonl", params),
        ("acceptance.json", acceptance),
    ])
}

pub fn write_chain(out: &Path, trace: &ChainTrace) -> CliResult<PathBuf> {
    let dir = chain_dir(out, trace.chain_index);
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    for (name, text) in render_chain(trace)? {
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(dir)
}

fn read_labels(path: &Path) -> CliResult<Vec<(usize, Vec<u32>)>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad =
        |line: usize, what: &str| CliError::Data(format!("{}:{line}: {what}", path.display()));
    text.lines()
        .enumerate()
        .skip(1)
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, line)| {
            let mut cells = line.split(',');
            let it = cells
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| bad(i + 1, "bad iteration number"))?;
            let labels = cells
                .map(|c| match c.parse::<u32>() {
                    Ok(l) if l >= 1 => Ok(l - 1),
                    _ => Err(bad(i + 1, "labels must be positive integers")),
                })
                .collect::<CliResult<Vec<_>>>()?;
            Ok((it, labels))
        })
        .collect()
}

/// Rebuild the kept records of one chain directory.
pub fn read_chain(dir: &Path, max_depth: usize) -> CliResult<Vec<IterationRecord>> {
    let oc = read_labels(&dir.join("trace.oc.csv"))?;
    let groups = read_labels(&dir.join("trace.group.csv"))?;
    let params_path = dir.join("trace.params.jsonl");
    let text = fs::read_to_string(&params_path).map_err(|e| CliError::io(&params_path, e))?;
    let params = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<ParamsJson>(l)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", params_path.display(), i + 1)))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if oc.len() != params.len() || groups.len() != params.len() {
        return Err(CliError::Data(format!(
            "{}: trace files disagree on the number of iterations",
            dir.display()
        )));
    }
    oc.into_iter()
        .zip(groups)
        .zip(params)
        .map(|(((it, c), (it_g, g)), p)| {
            if it != p.iteration || it_g != p.iteration {
                return Err(CliError::Data(format!(
                    "{}: iteration {} out of step across trace files",
                    dir.display(),
                    p.iteration
                )));
            }
            let tree = p.tree.to_tree(max_depth)?;
            Ok(IterationRecord {
                iteration: p.iteration,
                c,
                groups: g,
                d: p.d.iter().map(|&k| k.saturating_sub(1)).collect(),
                tree,
                atoms: p.atoms.into_iter().map(Atom::from).collect(),
                global: p.global,
                alpha: p.alpha,
                beta: p.beta,
                rho: p.rho,
                nu: p.nu.concat(),
                log_likelihood: p.log_likelihood.unwrap_or(f64::NEG_INFINITY),
            })
        })
        .collect()
}

/// All `chain_<k>` directories under `out`, in chain order.
pub fn chain_dirs(out: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(out).map_err(|e| CliError::io(out, e))?;
    let mut dirs: Vec<(u64, PathBuf)> = entries
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().to_string_lossy().into_owned();
            let k = name.strip_prefix("chain_")?.parse().ok()?;
            e.path().is_dir().then(|| (k, e.path()))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no chain_<k> trace directories",
            out.display()
        )));
    }
    Ok(dirs.into_iter().map(|(_, p)| p).collect())
}
