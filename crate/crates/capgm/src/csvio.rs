//! Dataset and truth files.
//!
//! Datasets have a header row, a response column, predictor columns and an
//! optional group column. Every cell must parse as a number; nominal
//! covariates have to be dummy-coded beforehand.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use capgm_core::sampler::Method;
use capgm_core::simgen::SimTruth;
use capgm_core::Dataset;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// A fully numeric CSV held column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.header
            .iter()
            .position(|h| h == name)
            .map(|j| self.columns[j].as_slice())
    }
}

pub fn read_table(path: &Path) -> CliResult<NumericTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let where_ = |line: u64| format!("{}:{line}", path.display());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Data(format!("{}: {e}", where_(1))))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Data(format!("{}: missing header row", where_(1))));
    }
    if let Some(dup) = header
        .iter()
        .enumerate()
        .find(|(j, h)| header[..*j].contains(h))
    {
        return Err(CliError::Data(format!(
            "{}: duplicate column '{}'",
            where_(1),
            dup.1
        )));
    }
    let mut columns = vec![Vec::new(); header.len()];
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Data(format!("{}: {e}", where_(line)))
        })?;
        let line = record.position().map_or(0, |p| p.line());
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Data(format!(
                    "{}: column '{}' has non-numeric value '{cell}'",
                    where_(line),
                    header[j]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Data(format!(
                    "{}: column '{}' has non-finite value '{cell}'",
                    where_(line),
                    header[j]
                )));
            }
            columns[j].push(v);
        }
    }
    Ok(NumericTable { header, columns })
}

/// Data prepared for one method.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedData {
    pub dataset: Dataset,
    /// Predictor column names, in dataset order (empty for dp and cam).
    pub predictors: Vec<String>,
    /// 1-based group labels from the group column (cam only).
    pub groups: Option<Vec<i64>>,
    pub has_response: bool,
}

fn integer_column(name: &str, values: &[f64], path: &Path) -> CliResult<Vec<i64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v.fract() == 0.0 && v >= 1.0 {
                Ok(v as i64)
            } else {
                Err(CliError::Data(format!(
                    "{}:{}: column '{name}' must hold positive integer labels, got {v}",
                    path.display(),
                    i + 2
                )))
            }
        })
        .collect()
}

/// Load a dataset for `cfg.method`.
///
/// `predictors` fixes the predictor columns (used when scoring new data
/// against a fitted run); otherwise they come from the config or default to
/// every column except the response and group columns. When
/// `require_response` is false a missing response column is allowed and the
/// response is filled with zeros.
pub fn load_dataset(
    path: &Path,
    cfg: &RunConfig,
    predictors: Option<&[String]>,
    require_response: bool,
) -> CliResult<LoadedData> {
    let table = read_table(path)?;
    let n = table.rows();
    let (y, has_response) = match table.column(&cfg.response) {
        Some(y) => (y.to_vec(), true),
        None if !require_response => (vec![0.0; n], false),
        None => {
            return Err(CliError::Data(format!(
                "{}: response column '{}' not found (columns: {})",
                path.display(),
                cfg.response,
                table.header.join(", ")
            )))
        }
    };
    let groups = match cfg.method {
        Method::Cam => {
            let col = table.column(&cfg.group_column).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: group column '{}' not found; method cam needs a fixed grouping",
                    path.display(),
                    cfg.group_column
                ))
            })?;
            Some(integer_column(&cfg.group_column, col, path)?)
        }
        _ => None,
    };
    let names: Vec<String> = match cfg.method {
        Method::Capgm => match predictors
            .map(<[String]>::to_vec)
            .or_else(|| cfg.predictors.clone())
        {
            Some(list) => list,
            None => table
                .header
                .iter()
                .filter(|h| **h != cfg.response && **h != cfg.group_column)
                .cloned()
                .collect(),
        },
        Method::Cam | Method::Dp => Vec::new(),
    };
    if cfg.method == Method::Capgm && names.is_empty() {
        return Err(CliError::Data(format!(
            "{}: method capgm needs at least one predictor column",
            path.display()
        )));
    }
    let cols = names
        .iter()
        .map(|name| {
            table.column(name).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: predictor column '{name}' not found",
                    path.display()
                ))
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    let p = cols.len();
    let mut x = Vec::with_capacity(n * p);
    for i in 0..n {
        x.extend(cols.iter().map(|c| c[i]));
    }
    let dataset = Dataset::new(y, x, p, cfg.tree.q1, cfg.tree.q2).map_err(CliError::from_model)?;
    Ok(LoadedData {
        dataset,
        predictors: names,
        groups,
        has_response,
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Write `y, x1..xP` with shortest round-trip formatting, so reading the file
/// back reproduces every value bit for bit.
pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let io = |e: csv::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.p).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(io)?;
    for i in 0..data.n {
        let mut row = vec![data.y[i].to_string()];
        row.extend(data.row(i).iter().map(f64::to_string));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Write `group, dc, oc` truth labels, 1-based.
pub fn write_truth(path: &Path, truth: &SimTruth) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "group,dc,oc").map_err(io)?;
    for i in 0..truth.groups.len() {
        writeln!(
            w,
            "{},{},{}",
            truth.groups[i] + 1,
            truth.dcs[i] + 1,
            truth.ocs[i] + 1
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Truth labels read back as 0-based partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthLabels {
    pub group: Option<Vec<u32>>,
    pub dc: Option<Vec<u32>>,
    pub oc: Option<Vec<u32>>,
}

pub fn read_truth(path: &Path) -> CliResult<TruthLabels> {
    let table = read_table(path)?;
    let col = |name: &str| -> CliResult<Option<Vec<u32>>> {
        table
            .column(name)
            .map(|c| {
                integer_column(name, c, path)
                    .map(|v| v.into_iter().map(|x| (x - 1) as u32).collect())
            })
            .transpose()
    };
    Ok(TruthLabels {
        group: col("group")?,
        dc: col("dc")?,
        oc: col("oc")?,
    })
}
