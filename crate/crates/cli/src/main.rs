use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robin_eit::config::{ExperimentConfig, SweepAxis};
use robin_eit::runner::{self, RunOutcome};
use robin_eit::{Error, Result};

/// Qualitative imaging of a Robin interface inside the unit disk.
#[derive(Parser)]
#[command(name = "robin-eit", version, about)]
struct Cli {
    /// Run built-in numerical smoke checks and exit.
    #[arg(long)]
    self_check: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file with `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,

    /// Noise seed (overrides the file).
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (overrides the file).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Extra `key=value` overrides, applied after the file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Suppress the run summary.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize the gap operator.
    Forward(Common),
    /// Green's trace at sampling points.
    Greens {
        #[command(flatten)]
        common: Common,
        /// Sampling point `rho:theta`; may repeat.
        #[arg(long = "z", value_name = "RHO:THETA")]
        z: Vec<String>,
    },
    /// LSM and RFM indicator maps.
    Image(Common),
    /// Picard partial sums at sampling points.
    Picard {
        #[command(flatten)]
        common: Common,
        #[arg(long = "z", value_name = "RHO:THETA")]
        z: Vec<String>,
    },
    /// Reconstruction metrics along one parameter axis.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `delta`, `alpha` or `rho`.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated values.
        #[arg(long)]
        values: Option<String>,
    },
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config {
            line: 0,
            key: kv.clone(),
            message: "expected --set key=value".into(),
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn with_points(mut cfg: ExperimentConfig, z: &[String]) -> Result<ExperimentConfig> {
    if !z.is_empty() {
        cfg.set("points", &z.join(";"))?;
    }
    Ok(cfg)
}

fn report(outcome: &RunOutcome, quiet: bool) {
    for w in &outcome.manifest.warnings {
        eprintln!("warning: {w}");
    }
    if quiet {
        return;
    }
    for a in &outcome.manifest.artifacts {
        println!("{}  {}", a.sha256, a.path);
    }
    println!(
        "{} finished in {:.2}s; manifest at {}",
        outcome.manifest.command,
        outcome.manifest.wall_clock_seconds,
        outcome.manifest_path.display()
    );
}

fn run(cli: Cli) -> Result<bool> {
    if cli.self_check {
        let mut ok = true;
        for line in runner::self_check()? {
            let status = if line.passed() { "PASS" } else { "FAIL" };
            ok &= line.passed();
            println!("{status}  {}  ({:.3e} <= {:.0e})", line.name, line.value, line.tolerance);
        }
        return Ok(ok);
    }
    let Some(command) = cli.command else {
        return Err(Error::Invalid("no subcommand given; try --help".into()));
    };
    let (outcome, quiet) = match command {
        Command::Forward(c) => (runner::run_forward(&load(&c)?)?, c.quiet),
        Command::Greens { common, z } => (runner::run_greens(&with_points(load(&common)?, &z)?)?, common.quiet),
        Command::Image(c) => (runner::run_image(&load(&c)?)?, c.quiet),
        Command::Picard { common, z } => (runner::run_picard(&with_points(load(&common)?, &z)?)?, common.quiet),
        Command::Sweep { common, axis, values } => {
            let mut cfg = load(&common)?;
            if let Some(a) = axis {
                cfg.sweep_axis = Some(a.parse::<SweepAxis>().map_err(|e| Error::Config {
                    line: 0,
                    key: "axis".into(),
                    message: e.to_string(),
                })?);
            }
            if let Some(v) = values {
                cfg.set("sweep_values", &v)?;
            }
            (runner::run_sweep(&cfg)?, common.quiet)
        }
    };
    report(&outcome, quiet);
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
