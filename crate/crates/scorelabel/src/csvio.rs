//! CSV and JSON artifacts: data tables, labeled pairs, trajectories, histograms.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use scorelabel_core::data::{default_names, DataMatrix};
use scorelabel_core::integrate::Trajectory;
use scorelabel_core::labeler::{LabeledPairSet, Provenance};
use scorelabel_core::{Matrix, MetricsReport};

use crate::error::{Error, Result};

/// Shortest representation that parses back to the same bits.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::write(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::write(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::WriterBuilder::new().from_writer(create(path)?))
}

fn csv_write_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::write(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

/// Rows of numbers with an optional header.
///
/// `has_header = None` treats the first row as a header when any of its cells is
/// not a number. Errors name the 1-based line and column of the offending cell.
pub fn read_table(path: &Path, has_header: Option<bool>) -> Result<(Matrix, Option<Vec<String>>)> {
    let file = File::open(path).map_err(|e| Error::read(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut header = None;
    let mut width = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::read(path, io),
            other => Error::format(path, format!("{other:?}")),
        })?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if i == 0 {
            let numeric = record.iter().all(|c| c.parse::<f64>().is_ok());
            if has_header.unwrap_or(!numeric) {
                header = Some(record.iter().map(str::to_string).collect::<Vec<_>>());
                width = Some(record.len());
                continue;
            }
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::format(path, format!("line {line}: {} fields, expected {expected}", record.len())));
        }
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(path, format!("line {line}, column {}: cannot parse {cell:?} as a number", j + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::format(path, format!("line {line}, column {}: non-finite value", j + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    if rows == 0 || cols == 0 {
        return Err(Error::format(path, "no data rows"));
    }
    Ok((Matrix::from_vec(rows, cols, values)?, header))
}

pub fn load_csv(path: &Path, has_header: Option<bool>) -> Result<DataMatrix> {
    let (values, header) = read_table(path, has_header)?;
    let names = header.unwrap_or_else(|| default_names("x", values.cols()));
    Ok(DataMatrix::new(values, names)?)
}

pub fn write_table(path: &Path, header: &[String], values: &Matrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(|e| csv_write_err(path, e))?;
    let mut cells = Vec::with_capacity(values.cols());
    for row in values.iter_rows() {
        cells.clear();
        cells.extend(row.iter().map(|&v| fmt_f64(v)));
        w.write_record(&cells).map_err(|e| csv_write_err(path, e))?;
    }
    w.flush().map_err(|e| Error::write(path, e))
}

pub fn save_csv(data: &DataMatrix, path: &Path) -> Result<()> {
    write_table(path, data.column_names(), data.values())
}

/// Unnamed samples get columns `x0..x{d-1}`.
pub fn save_samples(samples: &Matrix, path: &Path) -> Result<()> {
    write_table(path, &default_names("x", samples.cols()), samples)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::write(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| Error::write(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::read(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(path, e.to_string()))
}

/// `pairs.csv` -> `pairs.csv.provenance.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".provenance.json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    count: usize,
    dims: usize,
    provenance: Option<Provenance>,
}

/// Columns `y0..y{d-1}` (inputs) then `x0..x{d-1}` (labels), plus a provenance sidecar.
pub fn save_pairs(pairs: &LabeledPairSet, path: &Path) -> Result<()> {
    let d = pairs.dims();
    let mut header = default_names("y", d);
    header.extend(default_names("x", d));
    let mut joined = Vec::with_capacity(pairs.len() * 2 * d);
    for (y, x) in pairs.inputs.iter_rows().zip(pairs.outputs.iter_rows()) {
        joined.extend_from_slice(y);
        joined.extend_from_slice(x);
    }
    write_table(path, &header, &Matrix::from_vec(pairs.len(), 2 * d, joined)?)?;
    let sidecar = Sidecar { count: pairs.len(), dims: d, provenance: pairs.provenance.clone() };
    write_json(&sidecar_path(path), &sidecar)
}

/// Loads a pair file. A missing sidecar is tolerated with a warning.
pub fn load_pairs(path: &Path) -> Result<LabeledPairSet> {
    let (table, _) = read_table(path, None)?;
    if table.cols() % 2 != 0 {
        return Err(Error::format(path, format!("pair file needs an even column count, found {}", table.cols())));
    }
    let d = table.cols() / 2;
    let side = sidecar_path(path);
    let provenance = if side.exists() {
        let sidecar: Sidecar = read_json(&side)?;
        if sidecar.dims != d || sidecar.count != table.rows() {
            return Err(Error::format(
                &side,
                format!(
                    "sidecar describes {} pairs of dimension {}, file holds {} of dimension {d}",
                    sidecar.count,
                    sidecar.dims,
                    table.rows()
                ),
            ));
        }
        sidecar.provenance
    } else {
        log::warn!("{}: no provenance sidecar, loading pairs without provenance", path.display());
        None
    };
    let inputs = table.select_cols(&(0..d).collect::<Vec<_>>());
    let outputs = table.select_cols(&(d..2 * d).collect::<Vec<_>>());
    Ok(LabeledPairSet::new(inputs, outputs, provenance)?)
}

/// Header `t,dim0,...,dim{d-1},traj_id`; trajectories are written one after another.
pub fn save_trajectories(trajectories: &[Trajectory], path: &Path) -> Result<()> {
    let d = trajectories.first().map_or(0, |t| t.states.cols());
    let mut header = vec!["t".to_string()];
    header.extend(default_names("dim", d));
    header.push("traj_id".into());
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(|e| csv_write_err(path, e))?;
    let mut cells = Vec::with_capacity(d + 2);
    for (id, traj) in trajectories.iter().enumerate() {
        for (t, row) in traj.times.iter().zip(traj.states.iter_rows()) {
            cells.clear();
            cells.push(fmt_f64(*t));
            cells.extend(row.iter().map(|&v| fmt_f64(v)));
            cells.push(id.to_string());
            w.write_record(&cells).map_err(|e| csv_write_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::write(path, e))
}

/// One row per (dimension, bin) with both histograms side by side.
pub fn save_histograms(report: &MetricsReport, path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["dim", "bin", "left", "right", "truth_count", "truth_density", "cand_count", "cand_density"])
        .map_err(|e| csv_write_err(path, e))?;
    for d in &report.dims {
        let (th, ch) = (&d.truth_hist, &d.cand_hist);
        for b in 0..th.bins() {
            w.write_record([
                d.dim.to_string(),
                b.to_string(),
                fmt_f64(th.edges[b]),
                fmt_f64(th.edges[b + 1]),
                th.counts[b].to_string(),
                fmt_f64(th.density[b]),
                ch.counts[b].to_string(),
                fmt_f64(ch.density[b]),
            ])
            .map_err(|e| csv_write_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::write(path, e))
}

/// The JSON summary of a comparison, without the histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub dims: Vec<DimSummary>,
    pub bins: usize,
    pub smoothing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSummary {
    pub dim: usize,
    pub kl_fwd: f64,
    pub kl_rev: f64,
    pub mean_truth: f64,
    pub mean_cand: f64,
    pub std_truth: f64,
    pub std_cand: f64,
    /// Candidate samples outside the truth range, counted in the end bins.
    pub clipped_cand: u64,
}

impl From<&MetricsReport> for MetricsSummary {
    fn from(r: &MetricsReport) -> Self {
        let dims = r
            .dims
            .iter()
            .map(|d| DimSummary {
                dim: d.dim,
                kl_fwd: d.kl_fwd,
                kl_rev: d.kl_rev,
                mean_truth: d.mean_truth,
                mean_cand: d.mean_cand,
                std_truth: d.std_truth,
                std_cand: d.std_cand,
                clipped_cand: d.cand_hist.clipped,
            })
            .collect();
        Self { dims, bins: r.bins, smoothing: r.smoothing }
    }
}

impl MetricsSummary {
    pub fn max_kl(&self) -> f64 {
        self.dims.iter().map(|d| d.kl_fwd).fold(0.0, f64::max)
    }
}
