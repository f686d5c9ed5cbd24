//! Long-format CSV panels: one row per (subject, time) carrying the subject
//! id, the time value `g`, static covariates, dynamic covariates and one
//! column per response region.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use gcm_core::model::Dims;
use gcm_core::GrowthCurveDataset;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

pub const STATIC_PREFIX: &str = "x_";
pub const DYNAMIC_PREFIX: &str = "z_";
pub const RESPONSE_PREFIX: &str = "y_";

/// Which header names play which role. Unset lists fall back to the
/// `x_` / `z_` / `y_` prefixes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub id: String,
    pub time: String,
    pub static_columns: Option<Vec<String>>,
    pub dynamic_columns: Option<Vec<String>>,
    pub response_columns: Option<Vec<String>>,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self {
            id: "subject".into(),
            time: "time".into(),
            static_columns: None,
            dynamic_columns: None,
            response_columns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColumnNames {
    pub id: String,
    pub time: String,
    pub statics: Vec<String>,
    pub dynamics: Vec<String>,
    pub responses: Vec<String>,
}

impl ColumnNames {
    /// Default names for a dataset without a header of its own.
    pub fn generic(dims: Dims) -> Self {
        Self {
            id: "subject".into(),
            time: "time".into(),
            statics: (1..=dims.n_static).map(|k| format!("{STATIC_PREFIX}{k}")).collect(),
            dynamics: (1..=dims.n_dynamic).map(|k| format!("{DYNAMIC_PREFIX}{k}")).collect(),
            responses: (1..=dims.n_regions).map(|k| format!("{RESPONSE_PREFIX}{k}")).collect(),
        }
    }
}

/// Centering and scaling applied to one covariate column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnScaling {
    pub column: String,
    pub mean: f64,
    pub sd: f64,
    /// `false` for binary and constant columns, which are left as read.
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub dataset: GrowthCurveDataset,
    pub subject_ids: Vec<String>,
    pub names: ColumnNames,
    pub scaling: Vec<ColumnScaling>,
}

struct Row {
    line: u64,
    time: f64,
    statics: Vec<f64>,
    dynamics: Vec<f64>,
    responses: Vec<f64>,
}

fn resolve(header: &csv::StringRecord, mapping: &ColumnMapping) -> AppResult<(ColumnNames, [usize; 2], [Vec<usize>; 3])> {
    let mut index = HashMap::new();
    for (k, name) in header.iter().enumerate() {
        if index.insert(name.to_string(), k).is_some() {
            return Err(AppError::Data(format!("duplicate column '{name}' in header")));
        }
    }
    let find = |name: &str| {
        index
            .get(name)
            .copied()
            .ok_or_else(|| AppError::Data(format!("column '{name}' not found in header")))
    };
    let by_prefix = |prefix: &str| -> Vec<String> {
        header.iter().filter(|h| h.starts_with(prefix)).map(str::to_string).collect()
    };
    let statics = mapping.static_columns.clone().unwrap_or_else(|| by_prefix(STATIC_PREFIX));
    let dynamics = mapping.dynamic_columns.clone().unwrap_or_else(|| by_prefix(DYNAMIC_PREFIX));
    let responses = mapping.response_columns.clone().unwrap_or_else(|| by_prefix(RESPONSE_PREFIX));
    if responses.is_empty() {
        return Err(AppError::Data("no response columns".into()));
    }

    let mut seen = HashMap::new();
    let roles = [
        ("id", std::slice::from_ref(&mapping.id)),
        ("time", std::slice::from_ref(&mapping.time)),
        ("static", &statics[..]),
        ("dynamic", &dynamics[..]),
        ("response", &responses[..]),
    ];
    for (role, names) in roles {
        for name in names {
            if let Some(prev) = seen.insert(name.as_str(), role) {
                return Err(AppError::Data(format!("column '{name}' is mapped as both {prev} and {role}")));
            }
        }
    }

    let idx = |names: &[String]| names.iter().map(|n| find(n)).collect::<AppResult<Vec<_>>>();
    let cols = [idx(&statics)?, idx(&dynamics)?, idx(&responses)?];
    let keys = [find(&mapping.id)?, find(&mapping.time)?];
    let names = ColumnNames {
        id: mapping.id.clone(),
        time: mapping.time.clone(),
        statics,
        dynamics,
        responses,
    };
    Ok((names, keys, cols))
}

fn parse_cell(record: &csv::StringRecord, col: usize, name: &str, line: u64) -> AppResult<f64> {
    let cell = record.get(col).unwrap_or("");
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(AppError::Data(format!("row {line}, column '{name}': value '{cell}' is not finite"))),
        Err(_) => Err(AppError::Data(format!("row {line}, column '{name}': cannot parse '{cell}' as a number"))),
    }
}

/// Reads a panel from any reader. Subjects keep their order of first
/// appearance and rows are sorted by time within each subject.
pub fn read_panel<R: Read>(reader: R, mapping: &ColumnMapping) -> AppResult<Panel> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(b',')
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let (names, [id_col, time_col], [s_cols, d_cols, r_cols]) = resolve(&header, mapping)?;

    let mut order: Vec<String> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<Vec<Row>> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(AppError::Data(format!("row {line}: empty subject id")));
        }
        let parse_all = |cols: &[usize], labels: &[String]| {
            cols.iter()
                .zip(labels)
                .map(|(&c, n)| parse_cell(&record, c, n, line))
                .collect::<AppResult<Vec<_>>>()
        };
        let row = Row {
            line,
            time: parse_cell(&record, time_col, &names.time, line)?,
            statics: parse_all(&s_cols, &names.statics)?,
            dynamics: parse_all(&d_cols, &names.dynamics)?,
            responses: parse_all(&r_cols, &names.responses)?,
        };
        let k = *slot.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[k].push(row);
    }
    if groups.is_empty() {
        return Err(AppError::Data("no data rows".into()));
    }

    for (id, rows) in order.iter().zip(groups.iter_mut()) {
        rows.sort_by(|a, b| a.time.total_cmp(&b.time));
        for w in rows.windows(2) {
            if w[0].time == w[1].time {
                return Err(AppError::Data(format!(
                    "duplicate (subject, time) = ({id}, {}) at rows {} and {}",
                    w[0].time,
                    w[0].line.min(w[1].line),
                    w[0].line.max(w[1].line)
                )));
            }
        }
        for (k, name) in names.statics.iter().enumerate() {
            if rows.iter().any(|r| r.statics[k] != rows[0].statics[k]) {
                return Err(AppError::Data(format!(
                    "time-invariant column varies: '{name}' within subject '{id}'"
                )));
            }
        }
    }

    let t = modal_count(&groups);
    let ragged: Vec<String> = order
        .iter()
        .zip(&groups)
        .filter(|(_, g)| g.len() != t)
        .map(|(id, g)| format!("'{id}' ({} rows)", g.len()))
        .collect();
    if !ragged.is_empty() {
        return Err(AppError::Data(format!(
            "ragged subjects: expected {t} rows per subject, found {}",
            ragged.join(", ")
        )));
    }
    if t < 3 {
        return Err(AppError::Data(format!("at least 3 time points per subject are required, got {t}")));
    }

    let dims = Dims {
        n_subjects: groups.len(),
        n_regions: names.responses.len(),
        n_times: t,
        n_static: names.statics.len(),
        n_dynamic: names.dynamics.len(),
    };
    let mut responses = Vec::with_capacity(dims.n_subjects * dims.n_regions * t);
    let mut times = Vec::with_capacity(dims.n_subjects * t);
    let mut statics = Vec::with_capacity(dims.n_subjects * dims.n_static);
    let mut dynamics = Vec::with_capacity(dims.n_subjects * t * dims.n_dynamic);
    for rows in &groups {
        for r in 0..dims.n_regions {
            responses.extend(rows.iter().map(|row| row.responses[r]));
        }
        times.extend(rows.iter().map(|row| row.time));
        statics.extend_from_slice(&rows[0].statics);
        for row in rows {
            dynamics.extend_from_slice(&row.dynamics);
        }
    }
    let dataset = GrowthCurveDataset::new(dims, responses, times, statics, dynamics)?;
    Ok(Panel {
        dataset,
        subject_ids: order,
        names,
        scaling: Vec::new(),
    })
}

/// Most frequent row count, the larger one on ties.
fn modal_count(groups: &[Vec<Row>]) -> usize {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for g in groups {
        *counts.entry(g.len()).or_default() += 1;
    }
    counts.into_iter().max_by_key(|&(len, n)| (n, len)).map_or(0, |(len, _)| len)
}

fn csv_error(e: csv::Error) -> AppError {
    match e.kind() {
        csv::ErrorKind::Io(_) => AppError::Data(format!("read failed: {e}")),
        _ => AppError::Data(format!("malformed CSV: {e}")),
    }
}

pub fn ingest(path: &Path, mapping: &ColumnMapping) -> AppResult<Panel> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    read_panel(std::io::BufReader::new(file), mapping)
}

fn column_scaling(name: &str, values: impl Iterator<Item = f64> + Clone) -> ColumnScaling {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.clone().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let mut distinct: Vec<f64> = values.collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    ColumnScaling {
        column: name.into(),
        mean,
        sd,
        applied: distinct.len() > 2 && sd > 0.0,
    }
}

/// Centers and scales every continuous covariate to mean 0, standard
/// deviation 1. Static columns are scaled across subjects, dynamic columns
/// across all observations. Columns with at most two distinct values are
/// treated as indicators and left alone.
pub fn standardize(panel: &mut Panel) -> AppResult<()> {
    let ds = &panel.dataset;
    let d = ds.dims();
    let mut statics = ds.static_covariates().to_vec();
    let mut dynamics = ds.dynamic_covariates().to_vec();
    let mut scaling = Vec::new();
    for (k, name) in panel.names.statics.iter().enumerate() {
        let s = column_scaling(name, statics.iter().skip(k).step_by(d.n_static).copied());
        if s.applied {
            statics.iter_mut().skip(k).step_by(d.n_static).for_each(|v| *v = (*v - s.mean) / s.sd);
        }
        scaling.push(s);
    }
    for (k, name) in panel.names.dynamics.iter().enumerate() {
        let s = column_scaling(name, dynamics.iter().skip(k).step_by(d.n_dynamic).copied());
        if s.applied {
            dynamics.iter_mut().skip(k).step_by(d.n_dynamic).for_each(|v| *v = (*v - s.mean) / s.sd);
        }
        scaling.push(s);
    }
    panel.dataset = GrowthCurveDataset::new(d, ds.responses().to_vec(), ds.time_values().to_vec(), statics, dynamics)?;
    panel.scaling = scaling;
    Ok(())
}

/// Writes the dataset back out in the long format [`read_panel`] accepts.
/// Numbers use the shortest representation that parses back to the same
/// value.
pub fn write_panel<W: Write>(writer: W, dataset: &GrowthCurveDataset, ids: &[String], names: &ColumnNames) -> AppResult<()> {
    let d = dataset.dims();
    let mut w = csv::WriterBuilder::new().delimiter(b',').from_writer(writer);
    let mut header = vec![names.id.clone(), names.time.clone()];
    header.extend(names.statics.iter().cloned());
    header.extend(names.dynamics.iter().cloned());
    header.extend(names.responses.iter().cloned());
    w.write_record(&header).map_err(write_error)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, id) in ids.iter().enumerate().take(d.n_subjects) {
        for t in 0..d.n_times {
            row.clear();
            row.push(id.clone());
            row.push(dataset.times_of(i)[t].to_string());
            row.extend(dataset.static_of(i).iter().map(f64::to_string));
            row.extend(dataset.dynamic_of(i, t).iter().map(f64::to_string));
            row.extend((0..d.n_regions).map(|r| dataset.response(i, r, t).to_string()));
            w.write_record(&row).map_err(write_error)?;
        }
    }
    w.flush().map_err(|e| AppError::io("<panel>", e))?;
    Ok(())
}

fn write_error(e: csv::Error) -> AppError {
    AppError::io("<panel>", std::io::Error::other(e.to_string()))
}

/// Subject ids `S1, S2, …` for datasets that have none.
pub fn generic_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("S{i}")).collect()
}
