use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use gpcert::attack::{run_attack_sweep, OriginClass};
use gpcert::bounds::{dataset_certificate, linear_grid, monotonicity_scan, DatasetCertificate};
use gpcert::experiment::{generate_blobs, run_sweep, SweepConfig};
use gpcert::gp::default_jitter;
use gpcert::io::{emit_plot_data, fmt_f64, load_dataset, save_dataset, write_records};
use gpcert::{Error, KernelSpec, Result};

#[derive(Parser)]
#[command(name = "gpcert", version, about = "Adversarial success bounds for GP classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct KernelArgs {
    /// Kernel amplitude.
    #[arg(long)]
    theta1: f64,
    /// Kernel length-scale (squared distance divisor).
    #[arg(long)]
    theta2: f64,
}

impl KernelArgs {
    fn spec(&self) -> Result<KernelSpec> {
        KernelSpec::gaussian(self.theta1, self.theta2)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Certificate for a dataset's closest cross-label pair, as JSON.
    Certify {
        /// CSV file or `.json` binary manifest.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Kernel value between original and perturbed point.
        #[arg(long, conflicts_with = "norm", required_unless_present = "norm")]
        r: Option<f64>,
        /// Euclidean perturbation length; converted to `r`.
        #[arg(long)]
        norm: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Recorded in the output; defaults to 1e-10 * theta1.
        #[arg(long)]
        jitter: Option<f64>,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Nearest-enemy attack on every origin point; writes per-point records as CSV.
    Attack {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
        /// Euclidean perturbation length.
        #[arg(long)]
        norm: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        /// Diagonal jitter; defaults to 1e-10 * theta1.
        #[arg(long)]
        jitter: Option<f64>,
        #[arg(long, value_enum, default_value_t = OriginClass::Plus)]
        origin_class: OriginClass,
        /// Write records here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write (distance, empirical, theoretical) triples.
        #[arg(long)]
        plot_data: Option<PathBuf>,
    },
    /// Runs a JSON-configured kernel-parameter sweep.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Tabulates the bound over a grid of pair kernel values `s`.
    ScanMonotone {
        #[command(flatten)]
        kernel: KernelArgs,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, requires = "s_max")]
        s_min: Option<f64>,
        #[arg(long, requires = "s_min")]
        s_max: Option<f64>,
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Explicit comma-separated grid, instead of --s-min/--s-max.
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["s_min", "s_max"])]
        grid: Option<Vec<f64>>,
    },
    /// Writes a two-blob synthetic dataset (CSV, or binary if OUT ends in `.json`).
    GenBlobs {
        #[arg(long)]
        n_per_class: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        separation: f64,
        #[arg(long)]
        spread: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Serialize)]
struct CertifyOutput<'a> {
    jitter: f64,
    #[serde(flatten)]
    result: &'a DatasetCertificate,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Certify {
            data,
            kernel,
            r,
            norm,
            epsilon,
            jitter,
            out,
        } => {
            let k = kernel.spec()?;
            let r = match (r, norm) {
                (Some(r), _) => r,
                (None, Some(n)) if n > 0.0 && n.is_finite() => k.eval_at_distance(n),
                (None, Some(n)) => return Err(Error::Config(format!("norm must be positive, got {n}"))),
                (None, None) => return Err(Error::Config("one of --r or --norm is required".into())),
            };
            let dataset = load_dataset(&data)?;
            let result = dataset_certificate(&dataset, r, epsilon, &k)?;
            let mut w = output(out.as_deref())?;
            serde_json::to_writer_pretty(
                &mut w,
                &CertifyOutput {
                    jitter: jitter.unwrap_or_else(|| default_jitter(&k)),
                    result: &result,
                },
            )?;
            writeln!(w)?;
            w.flush()?;
        }
        Command::Attack {
            data,
            kernel,
            norm,
            epsilon,
            jitter,
            origin_class,
            out,
            plot_data,
        } => {
            let k = kernel.spec()?;
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Config(format!("norm must be positive, got {norm}")));
            }
            let dataset = load_dataset(&data)?;
            let jitter = jitter.unwrap_or_else(|| default_jitter(&k));
            let records = run_attack_sweep(&dataset, k, norm, epsilon, jitter, origin_class)?;
            let mut w = output(out.as_deref())?;
            write_records(&records, &mut w)?;
            w.flush()?;
            if let Some(p) = plot_data {
                emit_plot_data(&records, &p)?;
            }
        }
        Command::Sweep { config, out_dir } => {
            let config = SweepConfig::from_json_file(&config)?;
            let summary = run_sweep(&config, &out_dir)?;
            let failed = summary.rows.iter().filter(|r| r.failure.is_some()).count();
            eprintln!(
                "{} conditions, {failed} failed; results in {}",
                summary.rows.len(),
                out_dir.display()
            );
        }
        Command::ScanMonotone {
            kernel,
            r,
            epsilon,
            s_min,
            s_max,
            points,
            grid,
        } => {
            let k = kernel.spec()?;
            let grid = match (grid, s_min, s_max) {
                (Some(g), _, _) => g,
                (None, Some(lo), Some(hi)) => linear_grid(lo, hi, points),
                _ => return Err(Error::Config("give --grid or both --s-min and --s-max".into())),
            };
            let report = monotonicity_scan(&k, r, epsilon, &grid)?;
            let mut w = output(None)?;
            writeln!(w, "# monotone={}", report.monotone)?;
            writeln!(w, "s,mu,sigma2,exact_tail,phi_bound")?;
            for row in &report.table {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    fmt_f64(row.s),
                    fmt_f64(row.mu),
                    fmt_f64(row.sigma2),
                    fmt_f64(row.exact_tail),
                    fmt_f64(row.phi_bound)
                )?;
            }
            w.flush()?;
        }
        Command::GenBlobs {
            n_per_class,
            dim,
            separation,
            spread,
            seed,
            out,
        } => {
            let dataset = generate_blobs(n_per_class, dim, separation, spread, seed)?;
            save_dataset(&dataset, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
