//! CSV input and output.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::Deserialize;
use smoothconf_core::{ExperimentTable, Locations, TableRow};

use crate::error::{CliError, CliResult};

pub const TABLE_HEADER: [&str; 7] = ["n", "key", "mean_beta", "band_lo", "band_hi", "rmse", "failures"];

fn open(path: &Path) -> CliResult<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    match e.position() {
        Some(pos) => CliError::Data(format!("{}:{}: {e}", path.display(), pos.line())),
        None => CliError::Data(format!("{}: {e}", path.display())),
    }
}

fn line_err(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}:{line}: {msg}", path.display()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| CliError::Data(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[derive(Deserialize)]
struct SiteRecord {
    site_id: String,
    x: f64,
    y: f64,
}

/// Site identifiers and planar coordinates from a `site_id,x,y` file.
pub fn read_locations(path: &Path) -> CliResult<(Vec<String>, Locations)> {
    let mut reader = open(path)?;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut seen = HashMap::new();
    for record in reader.deserialize::<SiteRecord>() {
        let r = record.map_err(|e| csv_err(path, e))?;
        let line = ids.len() as u64 + 2;
        if !(r.x.is_finite() && r.y.is_finite()) {
            return Err(line_err(path, line, "coordinates must be finite"));
        }
        if seen.insert(r.site_id.clone(), line).is_some() {
            return Err(line_err(path, line, format!("duplicate site_id {}", r.site_id)));
        }
        ids.push(r.site_id);
        coords.extend([r.x, r.y]);
    }
    if ids.is_empty() {
        return Err(CliError::Data(format!("{}: no sites", path.display())));
    }
    let locs = Locations::new(2, coords).map_err(CliError::from)?;
    Ok((ids, locs))
}

#[derive(Deserialize)]
struct LongRecord {
    site_id: String,
    x: f64,
    y: f64,
    replicate_id: String,
    variable: String,
    value: f64,
}

/// Long-format data: every variable observed at every site in every
/// replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct LongData {
    pub site_ids: Vec<String>,
    pub locations: Locations,
    pub replicate_ids: Vec<String>,
    /// Variables in first-seen order with `values[replicate][site]`.
    pub variables: Vec<(String, Vec<Vec<f64>>)>,
}

impl LongData {
    pub fn variable(&self, name: &str) -> CliResult<&Vec<Vec<f64>>> {
        self.variables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v)
            .ok_or_else(|| {
                let known: Vec<&str> = self.variables.iter().map(|(n, _)| n.as_str()).collect();
                CliError::Usage(format!("unknown variable {name}; data has {}", known.join(", ")))
            })
    }
}

/// Reads `site_id,x,y,replicate_id,variable,value` rows.
pub fn read_long_data(path: &Path) -> CliResult<LongData> {
    let mut reader = open(path)?;
    let mut site_index: HashMap<String, usize> = HashMap::new();
    let mut site_ids = Vec::new();
    let mut coords: Vec<(f64, f64)> = Vec::new();
    let mut rep_index: HashMap<String, usize> = HashMap::new();
    let mut replicate_ids = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut var_names = Vec::new();
    let mut cells: HashMap<(usize, usize, usize), f64> = HashMap::new();

    for (row, record) in reader.deserialize::<LongRecord>().enumerate() {
        let r = record.map_err(|e| csv_err(path, e))?;
        let line = row as u64 + 2;
        if !(r.x.is_finite() && r.y.is_finite() && r.value.is_finite()) {
            return Err(line_err(path, line, "non-finite number"));
        }
        let s = match site_index.get(&r.site_id) {
            Some(&s) => {
                if coords[s] != (r.x, r.y) {
                    return Err(line_err(path, line, format!("site {} has inconsistent coordinates", r.site_id)));
                }
                s
            }
            None => {
                site_index.insert(r.site_id.clone(), site_ids.len());
                site_ids.push(r.site_id);
                coords.push((r.x, r.y));
                site_ids.len() - 1
            }
        };
        let rep = *rep_index.entry(r.replicate_id.clone()).or_insert_with(|| {
            replicate_ids.push(r.replicate_id);
            replicate_ids.len() - 1
        });
        let v = *var_index.entry(r.variable.clone()).or_insert_with(|| {
            var_names.push(r.variable);
            var_names.len() - 1
        });
        if cells.insert((v, rep, s), r.value).is_some() {
            return Err(line_err(path, line, "duplicate (site, replicate, variable) entry"));
        }
    }
    if site_ids.is_empty() {
        return Err(CliError::Data(format!("{}: no data rows", path.display())));
    }
    let mut variables = Vec::with_capacity(var_names.len());
    for (v, name) in var_names.into_iter().enumerate() {
        let mut reps = Vec::with_capacity(replicate_ids.len());
        for (rep, rep_id) in replicate_ids.iter().enumerate() {
            let mut col = Vec::with_capacity(site_ids.len());
            for (s, site) in site_ids.iter().enumerate() {
                let value = cells.get(&(v, rep, s)).ok_or_else(|| {
                    CliError::Data(format!(
                        "{}: missing value for variable {name}, replicate {rep_id}, site {site}",
                        path.display()
                    ))
                })?;
                col.push(*value);
            }
            reps.push(col);
        }
        variables.push((name, reps));
    }
    let locations = Locations::new(2, coords.iter().flat_map(|&(x, y)| [x, y]).collect()).map_err(CliError::from)?;
    Ok(LongData { site_ids, locations, replicate_ids, variables })
}

fn float(v: f64) -> String {
    // `Display` for f64 prints the shortest string that parses back exactly.
    format!("{v}")
}

/// Renders a result table as CSV.
pub fn table_to_csv(table: &ExperimentTable) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(TABLE_HEADER).map_err(err)?;
    for r in &table.rows {
        w.write_record([
            r.n.to_string(),
            r.key.clone(),
            float(r.mean_beta),
            float(r.band_lo),
            float(r.band_hi),
            r.rmse.map(float).unwrap_or_default(),
            r.failures.to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}

pub fn write_table(path: &Path, table: &ExperimentTable) -> CliResult<()> {
    write_atomic(path, &table_to_csv(table)?)
}

#[derive(Deserialize)]
struct TableRecord {
    n: usize,
    key: String,
    mean_beta: f64,
    band_lo: f64,
    band_hi: f64,
    rmse: Option<f64>,
    failures: usize,
}

pub fn read_table(path: &Path) -> CliResult<ExperimentTable> {
    let mut reader = open(path)?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut table = ExperimentTable::new(name);
    for record in reader.deserialize::<TableRecord>() {
        let r = record.map_err(|e| csv_err(path, e))?;
        table.push(TableRow {
            n: r.n,
            key: r.key,
            mean_beta: r.mean_beta,
            band_lo: r.band_lo,
            band_hi: r.band_hi,
            rmse: r.rmse,
            failures: r.failures,
        });
    }
    Ok(table)
}

/// `site_id,x,y,value` rows for a simulated field. One-dimensional sites get
/// `y = 0`.
pub fn field_to_csv(ids: &[String], locations: &Locations, values: &[f64]) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(e.to_string());
    w.write_record(["site_id", "x", "y", "value"]).map_err(err)?;
    for (i, (id, v)) in ids.iter().zip(values).enumerate() {
        let p = locations.point(i);
        let y = p.get(1).copied().unwrap_or(0.0);
        w.write_record([id.clone(), float(p[0]), float(y), float(*v)]).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(e.to_string()))
}
