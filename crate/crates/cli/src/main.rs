use std::env;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fgromov_cli::commands::{self, Ctx, ReduceOptions};
use fgromov_cli::report::{emit_report, ConfigStamp, GroupStamp, Report};
use fgromov_cli::spec::{parse_group_spec, parse_matrix_file};
use fgromov_core::config::DEFAULT_ELEMENT_CAP;
use fgromov_core::{MarkedGroup, Result};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fgromov", version, about = "finitary growth-group laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Write a JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Ball cache directory (FGROMOV_CACHE also works; the flag wins).
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-enumeration element budget.
    #[arg(long, default_value_t = DEFAULT_ELEMENT_CAP)]
    element_cap: usize,
}

impl Common {
    fn ctx(&self) -> Ctx {
        let cache_dir = self
            .cache_dir
            .clone()
            .or_else(|| env::var_os("FGROMOV_CACHE").map(PathBuf::from));
        Ctx { cache_dir, element_cap: self.element_cap, seed: self.seed }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Ball sizes, degree estimate and stabilization marking
    Growth {
        #[arg(long)]
        group: PathBuf,
        #[arg(long, default_value_t = 12)]
        radius: u32,
        /// Write the CSV table here instead of stdout.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the reduction loop and emit the trace
    Reduce {
        #[arg(long)]
        group: PathBuf,
        #[arg(long, default_value_t = 8)]
        radius: u32,
        /// Maximum number of reduction steps.
        #[arg(long, default_value_t = fgromov_core::config::DEFAULT_STEP_BUDGET as u32)]
        budget: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive nilpotency check plus a generation certificate
    Certify {
        #[arg(long)]
        group: PathBuf,
        /// Nilpotency step to check.
        #[arg(long)]
        s: u32,
        #[arg(long, default_value_t = 4)]
        k: u32,
        #[arg(long, default_value_t = 4)]
        r: u32,
        /// Cap on the number of commutator tuples.
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Periodicity versus growth for a unimodular integer matrix
    Dichotomy {
        /// Matrix file: one row per line, # comments.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value_t = 20)]
        steps: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Build the almost-harmonic probe at one scale
    Harmonic {
        #[arg(long)]
        group: PathBuf,
        /// Construction scale; the window ball is one radius larger.
        #[arg(long, default_value_t = 8)]
        radius: u32,
        /// Dump the function values here as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Gram-volume dimension of the Dirichlet-harmonic candidate space
    KleinerDim {
        #[arg(long)]
        group: PathBuf,
        #[arg(long, default_value_t = 8)]
        radius: u32,
        #[arg(long, default_value_t = 40)]
        count: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Slow-growth generating set for a split Z-by-lattice group
    Slowg {
        #[arg(long)]
        group: PathBuf,
        /// Conjugation exponent range the certificate must cover.
        #[arg(long, default_value_t = 1)]
        range: u32,
        #[command(flatten)]
        common: Common,
    },
    /// Displacement inequality and ball bound, pure arithmetic
    MilnorCheck {
        /// Manifold dimension.
        #[arg(long)]
        n: u32,
        /// Ricci lower-bound scale K.
        #[arg(long, default_value_t = 0.0)]
        curvature: f64,
        /// Largest generator displacement.
        #[arg(long)]
        delta_max: f64,
        /// Smallest orbit displacement.
        #[arg(long)]
        delta_min: f64,
        #[arg(long)]
        radius: f64,
        /// Absolute constant for the hypothesis-scale warning.
        #[arg(long)]
        constant: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn load_group(path: &Path) -> Result<(String, MarkedGroup)> {
    let (spec, group, warnings) = parse_group_spec(path)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok((spec.name, group))
}

fn finish<T: Serialize>(
    command: &str,
    group: Option<(&str, &MarkedGroup)>,
    seed: Option<u64>,
    common: &Common,
    payload: T,
) -> Result<()> {
    let stamp = group.map(|(name, g)| GroupStamp {
        name: name.to_string(),
        fingerprint: g.fingerprint().to_string(),
    });
    let report = Report::new(
        command,
        stamp,
        seed,
        ConfigStamp::current(common.element_cap, fgromov_core::config::DEFAULT_STEP_BUDGET as u32),
        payload,
    );
    if let Some(path) = &common.report {
        emit_report(&report, path)?;
        eprintln!("report written to {}", path.display());
    } else {
        print!("{}", report.to_json()?);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Growth { group, radius, csv, common } => {
            let (name, g) = load_group(&group)?;
            let payload = commands::cmd_growth(&g, radius, &common.ctx())?;
            match &csv {
                Some(path) => {
                    let mut buf = Vec::new();
                    commands::growth_csv(&payload, &mut buf)?;
                    fs::write(path, buf)?;
                }
                None => commands::growth_csv(&payload, std::io::stdout().lock())?,
            }
            if common.report.is_some() {
                finish("growth", Some((&name, &g)), None, &common, payload)?;
            }
            Ok(())
        }
        Command::Reduce { group, radius, budget, common } => {
            let (name, g) = load_group(&group)?;
            let opts = ReduceOptions { radius, max_steps: budget, ..ReduceOptions::default() };
            let trace = commands::cmd_reduce(&g, &opts, &common.ctx())?;
            finish("reduce", Some((&name, &g)), None, &common, trace)
        }
        Command::Certify { group, s, k, r, budget, common } => {
            let (name, g) = load_group(&group)?;
            let payload = commands::cmd_certify_nilpotent(&g, s, k, r, budget, &common.ctx())?;
            finish("certify", Some((&name, &g)), None, &common, payload)
        }
        Command::Dichotomy { matrix, steps, common } => {
            let t = parse_matrix_file(&matrix)?;
            let payload = commands::cmd_dichotomy(&t, steps)?;
            finish("dichotomy", None, None, &common, payload)
        }
        Command::Harmonic { group, radius, csv, common } => {
            let (name, g) = load_group(&group)?;
            let mut csv_buf: Option<Vec<u8>> = csv.as_ref().map(|_| Vec::new());
            let payload = {
                let sink = csv_buf.as_mut().map(|b| b as &mut dyn std::io::Write);
                commands::cmd_harmonic(&g, radius, sink, &common.ctx())?
            };
            if let (Some(path), Some(buf)) = (&csv, csv_buf) {
                fs::write(path, buf)?;
            }
            finish("harmonic", Some((&name, &g)), None, &common, payload)
        }
        Command::KleinerDim { group, radius, count, common } => {
            let (name, g) = load_group(&group)?;
            let payload = commands::cmd_kleiner_dim(&g, radius, count, &common.ctx())?;
            finish("kleiner-dim", Some((&name, &g)), Some(common.seed), &common, payload)
        }
        Command::Slowg { group, range, common } => {
            let (name, g) = load_group(&group)?;
            let payload = commands::cmd_slowg(&g, range, &common.ctx())?;
            finish("slowg", Some((&name, &g)), None, &common, payload)
        }
        Command::MilnorCheck { n, curvature, delta_max, delta_min, radius, constant, common } => {
            let payload =
                commands::milnor_bound_check(n, curvature, delta_max, delta_min, radius, constant)?;
            if let Some(w) = &payload.hypothesis_warning {
                eprintln!("warning: {w}");
            }
            finish("milnor-check", None, None, &common, payload)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
