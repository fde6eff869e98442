//! Dataset files and result tables.
//!
//! Two dataset encodings are supported:
//!
//! * CSV with a header `f0,...,f{D-1},label` and labels `+1` / `-1`.
//! * A JSON manifest `{n, d, dtype: "f64", order: "row-major", data_path, labels}`
//!   next to a raw little-endian `f64` file. `data_path` is resolved relative to
//!   the manifest's directory.
//!
//! Floats are written with 17 significant digits so a CSV round trip is
//! value-exact.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackRecord;
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};

/// 17 significant digits, the lossless width for `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv<W: Write>(dataset: &LabeledDataset, mut out: W) -> Result<()> {
    let header: Vec<String> = (0..dataset.dim())
        .map(|j| format!("f{j}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..dataset.len() {
        let mut row: Vec<String> = dataset.point(i).iter().map(|&v| fmt_f64(v)).collect();
        row.push(dataset.label(i).to_string());
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn save_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

fn parse_label(field: &str) -> Option<Label> {
    let t = field.trim();
    let t = t.strip_prefix('+').unwrap_or(t);
    if let Ok(v) = t.parse::<i64>() {
        return Label::from_i64(v);
    }
    match t.parse::<f64>() {
        Ok(1.0) => Some(Label::Plus),
        Ok(-1.0) => Some(Label::Minus),
        _ => None,
    }
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let ncols = header.len();
    if ncols < 2 || header.get(ncols - 1) != Some("label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be f0..f{D-1},label".into(),
        });
    }
    for (j, name) in header.iter().take(ncols - 1).enumerate() {
        if name != format!("f{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column f{j}, found {name:?}"),
            });
        }
    }
    let dim = ncols - 1;
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (k, rec) in reader.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        if rec.len() != ncols {
            return Err(Error::Parse {
                line,
                message: format!("expected {ncols} fields, found {}", rec.len()),
            });
        }
        for j in 0..dim {
            let v: f64 = rec[j].parse().map_err(|_| Error::Parse {
                line,
                message: format!("column f{j}: not a number: {:?}", &rec[j]),
            })?;
            points.push(v);
        }
        let label = parse_label(&rec[dim]).ok_or_else(|| Error::Parse {
            line,
            message: format!("label must be +1 or -1, found {:?}", &rec[dim]),
        })?;
        labels.push(label);
    }
    LabeledDataset::new(points, dim, labels)
}

pub fn ingest_csv(path: &Path) -> Result<LabeledDataset> {
    read_csv(File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryManifest {
    pub n: usize,
    pub d: usize,
    pub dtype: String,
    pub order: String,
    pub data_path: String,
    pub labels: Vec<i8>,
}

/// Writes `<stem>.json` and `<stem>.f64` for the manifest path `<stem>.json`.
pub fn save_binary(dataset: &LabeledDataset, manifest_path: &Path) -> Result<()> {
    let data_file = manifest_path.with_extension("f64");
    let data_name = data_file
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::Config("manifest path has no file name".into()))?
        .to_string();
    let mut bytes = Vec::with_capacity(dataset.raw_points().len() * 8);
    for v in dataset.raw_points() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&data_file, bytes)?;
    let manifest = BinaryManifest {
        n: dataset.len(),
        d: dataset.dim(),
        dtype: "f64".into(),
        order: "row-major".into(),
        data_path: data_name,
        labels: dataset.labels().iter().map(|l| l.as_i8()).collect(),
    };
    fs::write(manifest_path, serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_binary(manifest_path: &Path) -> Result<LabeledDataset> {
    let manifest: BinaryManifest = serde_json::from_slice(&fs::read(manifest_path)?)?;
    if manifest.dtype != "f64" {
        return Err(Error::Config(format!("unsupported dtype {:?}", manifest.dtype)));
    }
    if manifest.order != "row-major" {
        return Err(Error::Config(format!("unsupported order {:?}", manifest.order)));
    }
    if manifest.labels.len() != manifest.n {
        return Err(Error::Config(format!(
            "manifest lists {} labels for n = {}",
            manifest.labels.len(),
            manifest.n
        )));
    }
    let base: PathBuf = manifest_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let bytes = fs::read(base.join(&manifest.data_path))?;
    if bytes.len() != manifest.n * manifest.d * 8 {
        return Err(Error::Config(format!(
            "data file holds {} bytes, expected {}",
            bytes.len(),
            manifest.n * manifest.d * 8
        )));
    }
    let points = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    let labels = manifest
        .labels
        .iter()
        .map(|&v| {
            Label::from_i64(v as i64)
                .ok_or_else(|| Error::Config(format!("manifest label {v} is not +1 or -1")))
        })
        .collect::<Result<Vec<_>>>()?;
    LabeledDataset::new(points, manifest.d, labels)
}

/// Loads a dataset, choosing the binary format for `.json` manifests and CSV otherwise.
pub fn load_dataset(path: &Path) -> Result<LabeledDataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => load_binary(path),
        _ => ingest_csv(path),
    }
}

pub fn save_dataset(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => save_binary(dataset, path),
        _ => save_csv(dataset, path),
    }
}

pub const RECORD_COLUMNS: [&str; 10] = [
    "origin_index",
    "origin_label",
    "nearest_enemy_index",
    "distance_to_enemy",
    "norm",
    "empirical_prob",
    "theoretical_exact",
    "theoretical_phi",
    "valid",
    "follows_theorem",
];

pub fn write_records<W: Write>(records: &[AttackRecord], mut out: W) -> Result<()> {
    writeln!(out, "{}", RECORD_COLUMNS.join(","))?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.origin_index,
            r.origin_label,
            r.nearest_enemy_index,
            fmt_f64(r.distance_to_enemy),
            fmt_f64(r.perturbation_norm),
            fmt_f64(r.empirical_prob),
            fmt_f64(r.theoretical_exact),
            fmt_f64(r.theoretical_phi),
            r.valid,
            r.follows_theorem
        )?;
    }
    Ok(())
}

pub fn save_records(records: &[AttackRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_records(records, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Row of a records CSV, as read back for recomputing aggregates.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct RecordRow {
    pub origin_index: usize,
    pub origin_label: String,
    pub nearest_enemy_index: usize,
    pub distance_to_enemy: f64,
    pub norm: f64,
    pub empirical_prob: f64,
    pub theoretical_exact: f64,
    pub theoretical_phi: f64,
    pub valid: bool,
    pub follows_theorem: bool,
}

pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        line: 0,
        message: e.to_string(),
    })?;
    reader
        .deserialize()
        .enumerate()
        .map(|(k, row)| {
            row.map_err(|e| Error::Parse {
                line: k + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Scatter data: `(distance_to_enemy, empirical_prob, theoretical_exact)` per record.
pub fn emit_plot_data(records: &[AttackRecord], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "distance_to_enemy,empirical_prob,theoretical_exact")?;
    for r in records {
        writeln!(
            w,
            "{},{},{}",
            fmt_f64(r.distance_to_enemy),
            fmt_f64(r.empirical_prob),
            fmt_f64(r.theoretical_exact)
        )?;
    }
    w.flush()?;
    Ok(())
}
