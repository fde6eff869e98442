//! Kernel-parameter sweeps over seeded or file-backed datasets.
//!
//! A sweep runs the attack harness for every `(theta1, theta2)` combination
//! and writes, under the output directory:
//!
//! * `summary.csv`, one row per condition;
//! * `records_t1-<theta1>_t2-<theta2>_rep<k>.csv` and matching `plot_...csv`
//!   files per condition and dataset replicate;
//! * `histogram.csv`, nearest-enemy distances of all origin points
//!   (Freedman-Diaconis bins; the width is written in the header).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{nearest_enemy, AttackRecord, AttackSweep, OriginClass};
use crate::dataset::{Label, LabeledDataset};
use crate::error::{Error, Result};
use crate::gp::default_jitter;
use crate::io::{emit_plot_data, fmt_f64, load_dataset, save_records};
use crate::kernel::KernelSpec;

/// Two isotropic Gaussian clouds whose centres are `separation` apart along the first axis.
///
/// The `+1` points come first. Output depends only on the arguments.
pub fn generate_blobs(
    n_per_class: usize,
    dim: usize,
    separation: f64,
    spread: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_per_class < 1 {
        return Err(Error::Config("n_per_class must be at least 1".into()));
    }
    if dim < 1 {
        return Err(Error::Config("dim must be at least 1".into()));
    }
    if !(spread > 0.0 && spread.is_finite()) {
        return Err(Error::Config(format!("spread must be positive, got {spread}")));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Config(format!("separation must be nonnegative, got {separation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(2 * n_per_class * dim);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (label, centre) in [(Label::Plus, 0.5 * separation), (Label::Minus, -0.5 * separation)] {
        for _ in 0..n_per_class {
            for j in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                points.push(if j == 0 { centre } else { 0.0 } + spread * z);
            }
            labels.push(label);
        }
    }
    LabeledDataset::new(points, dim, labels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub n_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetSource {
    Blobs(BlobSpec),
    /// CSV file, or a `.json` binary manifest.
    File(PathBuf),
}

/// Perturbation length, either absolute or relative to the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NormSpec {
    Absolute(f64),
    Relative { fraction_of_mean_nearest_enemy: f64 },
}

impl NormSpec {
    pub fn resolve(&self, dataset: &LabeledDataset, origin_class: OriginClass) -> f64 {
        match *self {
            NormSpec::Absolute(v) => v,
            NormSpec::Relative {
                fraction_of_mean_nearest_enemy: f,
            } => f * crate::attack::mean_nearest_enemy_distance(dataset, origin_class),
        }
    }

    fn value(&self) -> f64 {
        match *self {
            NormSpec::Absolute(v) => v,
            NormSpec::Relative {
                fraction_of_mean_nearest_enemy: f,
            } => f,
        }
    }
}

fn default_replicates() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub theta1_values: Vec<f64>,
    pub theta2_values: Vec<f64>,
    pub norm: NormSpec,
    #[serde(default)]
    pub epsilon: f64,
    /// Absolute jitter; `None` means `1e-10 * theta1` per condition.
    #[serde(default)]
    pub jitter: Option<f64>,
    pub seed: u64,
    pub dataset_source: DatasetSource,
    #[serde(default)]
    pub origin_class: OriginClass,
    /// Independent datasets per condition; blob replicate `k` uses seed `seed + k`.
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

impl SweepConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta1_values.is_empty() || self.theta2_values.is_empty() {
            return Err(Error::Config("theta1_values and theta2_values must be nonempty".into()));
        }
        for &t1 in &self.theta1_values {
            for &t2 in &self.theta2_values {
                KernelSpec::gaussian(t1, t2)?;
            }
        }
        let n = self.norm.value();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::Config(format!("norm must be positive, got {n}")));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if let Some(j) = self.jitter {
            if !(j >= 0.0 && j.is_finite()) {
                return Err(Error::Config(format!("jitter must be nonnegative, got {j}")));
            }
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        if matches!(self.dataset_source, DatasetSource::File(_)) && self.replicates != 1 {
            return Err(Error::Config("file datasets support exactly one replicate".into()));
        }
        Ok(())
    }

    pub fn conditions(&self) -> Vec<(f64, f64)> {
        self.theta1_values
            .iter()
            .flat_map(|&t1| self.theta2_values.iter().map(move |&t2| (t1, t2)))
            .collect()
    }

    pub fn load_datasets(&self) -> Result<Vec<LabeledDataset>> {
        match &self.dataset_source {
            DatasetSource::Blobs(b) => (0..self.replicates)
                .map(|k| {
                    generate_blobs(b.n_per_class, b.dim, b.separation, b.spread, self.seed.wrapping_add(k as u64))
                })
                .collect(),
            DatasetSource::File(p) => Ok(vec![load_dataset(p)?]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub theta1: f64,
    pub theta2: f64,
    /// `None` on success, otherwise the error that stopped the condition.
    pub failure: Option<String>,
    pub n_records: usize,
    pub n_valid: usize,
    pub n_violators: usize,
    pub proportion_following_theorem: f64,
    pub mean_max_theoretical: f64,
    pub std_max_theoretical: f64,
    pub mean_distance_violators: f64,
    pub mean_distance_all: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
}

impl SweepSummary {
    pub fn row(&self, theta1: f64, theta2: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.theta1 == theta1 && r.theta2 == theta2)
    }
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "theta1",
    "theta2",
    "status",
    "n_records",
    "n_valid",
    "n_violators",
    "proportion_following_theorem",
    "mean_max_theoretical",
    "std_max_theoretical",
    "mean_distance_violators",
    "mean_distance_all",
];

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        f64::NAN
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Aggregates one condition from its per-replicate record lists.
///
/// The maximum theoretical value is taken over valid records of each replicate;
/// its mean and population standard deviation are then taken across replicates.
pub fn summarize_condition(theta1: f64, theta2: f64, replicates: &[Vec<AttackRecord>]) -> SweepRow {
    let all: Vec<&AttackRecord> = replicates.iter().flatten().collect();
    let violators: Vec<f64> = all
        .iter()
        .filter(|r| !r.follows_theorem)
        .map(|r| r.distance_to_enemy)
        .collect();
    let maxima: Vec<f64> = replicates
        .iter()
        .map(|recs| {
            recs.iter()
                .filter(|r| r.valid)
                .map(|r| r.theoretical_exact)
                .fold(f64::NAN, f64::max)
        })
        .collect();
    let mean_max = mean(&maxima);
    let std_max = mean(&maxima.iter().map(|m| (m - mean_max).powi(2)).collect::<Vec<_>>()).sqrt();
    let n_follow = all.iter().filter(|r| r.follows_theorem).count();
    SweepRow {
        theta1,
        theta2,
        failure: None,
        n_records: all.len(),
        n_valid: all.iter().filter(|r| r.valid).count(),
        n_violators: violators.len(),
        proportion_following_theorem: if all.is_empty() {
            f64::NAN
        } else {
            n_follow as f64 / all.len() as f64
        },
        mean_max_theoretical: mean_max,
        std_max_theoretical: std_max,
        mean_distance_violators: mean(&violators),
        mean_distance_all: mean(&all.iter().map(|r| r.distance_to_enemy).collect::<Vec<_>>()),
    }
}

fn failed_row(theta1: f64, theta2: f64, err: &Error) -> SweepRow {
    SweepRow {
        theta1,
        theta2,
        failure: Some(err.to_string()),
        n_records: 0,
        n_valid: 0,
        n_violators: 0,
        proportion_following_theorem: f64::NAN,
        mean_max_theoretical: f64::NAN,
        std_max_theoretical: f64::NAN,
        mean_distance_violators: f64::NAN,
        mean_distance_all: f64::NAN,
    }
}

pub fn write_summary<W: Write>(summary: &SweepSummary, mut out: W) -> Result<()> {
    writeln!(out, "{}", SUMMARY_COLUMNS.join(","))?;
    for r in &summary.rows {
        let status = match &r.failure {
            None => "ok".to_string(),
            Some(msg) => format!("\"failed: {}\"", msg.replace('"', "'")),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.theta1),
            fmt_f64(r.theta2),
            status,
            r.n_records,
            r.n_valid,
            r.n_violators,
            fmt_f64(r.proportion_following_theorem),
            fmt_f64(r.mean_max_theoretical),
            fmt_f64(r.std_max_theoretical),
            fmt_f64(r.mean_distance_violators),
            fmt_f64(r.mean_distance_all)
        )?;
    }
    Ok(())
}

/// Equal-width histogram with Freedman-Diaconis bin width `2 IQR / n^(1/3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_width: f64,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn freedman_diaconis(values: &[f64]) -> Histogram {
    if values.is_empty() {
        return Histogram {
            bin_width: f64::NAN,
            edges: Vec::new(),
            counts: Vec::new(),
        };
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    let nbins = if width > 0.0 && max > min {
        ((max - min) / width).ceil().max(1.0) as usize
    } else {
        1
    };
    let bin_width = if nbins == 1 && !(width > 0.0 && max > min) {
        max - min
    } else {
        width
    };
    let edges: Vec<f64> = (0..=nbins).map(|b| min + bin_width * b as f64).collect();
    let mut counts = vec![0; nbins];
    for &v in &sorted {
        let b = if bin_width > 0.0 {
            (((v - min) / bin_width) as usize).min(nbins - 1)
        } else {
            0
        };
        counts[b] += 1;
    }
    Histogram {
        bin_width,
        edges,
        counts,
    }
}

pub fn write_histogram<W: Write>(hist: &Histogram, mut out: W) -> Result<()> {
    writeln!(out, "# rule=freedman-diaconis bin_width={}", fmt_f64(hist.bin_width))?;
    writeln!(out, "bin_lower,bin_upper,count")?;
    for (b, c) in hist.counts.iter().enumerate() {
        writeln!(out, "{},{},{}", fmt_f64(hist.edges[b]), fmt_f64(hist.edges[b + 1]), c)?;
    }
    Ok(())
}

/// File-name fragment for a condition, e.g. `t1-0.5_t2-10`.
pub fn condition_tag(theta1: f64, theta2: f64) -> String {
    format!("t1-{theta1}_t2-{theta2}")
}

pub fn records_file_name(theta1: f64, theta2: f64, replicate: usize) -> String {
    format!("records_{}_rep{replicate}.csv", condition_tag(theta1, theta2))
}

pub fn plot_file_name(theta1: f64, theta2: f64, replicate: usize) -> String {
    format!("plot_{}_rep{replicate}.csv", condition_tag(theta1, theta2))
}

fn run_condition(
    config: &SweepConfig,
    datasets: &[(LabeledDataset, f64)],
    theta1: f64,
    theta2: f64,
    out_dir: &Path,
) -> Result<Vec<Vec<AttackRecord>>> {
    let kernel = KernelSpec::gaussian(theta1, theta2)?;
    let jitter = config.jitter.unwrap_or_else(|| default_jitter(&kernel));
    datasets
        .iter()
        .enumerate()
        .map(|(k, (dataset, norm))| {
            let records = AttackSweep {
                dataset,
                kernel,
                norm: *norm,
                epsilon: config.epsilon,
                jitter,
                origin_class: config.origin_class,
            }
            .run()?;
            save_records(&records, &out_dir.join(records_file_name(theta1, theta2, k)))?;
            emit_plot_data(&records, &out_dir.join(plot_file_name(theta1, theta2, k)))?;
            Ok(records)
        })
        .collect()
}

/// Runs every condition of `config`, writing result files into `out_dir`.
///
/// A condition that fails numerically is reported in the summary; the others
/// still run. Configuration and I/O problems abort the sweep.
pub fn run_sweep(config: &SweepConfig, out_dir: &Path) -> Result<SweepSummary> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let datasets: Vec<(LabeledDataset, f64)> = config
        .load_datasets()?
        .into_iter()
        .map(|d| {
            let norm = config.norm.resolve(&d, config.origin_class);
            (d, norm)
        })
        .collect();

    let distances: Vec<f64> = datasets
        .iter()
        .flat_map(|(d, _)| {
            config
                .origin_class
                .origins(d)
                .into_iter()
                .map(move |i| nearest_enemy(d, i).1)
        })
        .collect();
    let mut w = BufWriter::new(File::create(out_dir.join("histogram.csv"))?);
    write_histogram(&freedman_diaconis(&distances), &mut w)?;
    w.flush()?;

    let rows = config
        .conditions()
        .par_iter()
        .map(|&(t1, t2)| match run_condition(config, &datasets, t1, t2, out_dir) {
            Ok(reps) => Ok(summarize_condition(t1, t2, &reps)),
            Err(e @ (Error::Io(_) | Error::Config(_))) => Err(e),
            Err(e) => Ok(failed_row(t1, t2, &e)),
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = SweepSummary { rows };
    let mut w = BufWriter::new(File::create(out_dir.join("summary.csv"))?);
    write_summary(&summary, &mut w)?;
    w.flush()?;
    Ok(summary)
}
