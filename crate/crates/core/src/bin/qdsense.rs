use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdsense::experiments::{run, Experiment, Grid, RunConfig};
use qdsense::Error;

#[derive(Parser)]
#[command(name = "qdsense", version, about = "Run a named sensing experiment and write its tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Response curves and dynamic ranges of CSS, QA and QD
    Response(Flags),
    /// Optimized CSS/SSS/QD frontier with the OQI limit
    Frontier(Flags),
    /// Conditional MSE at each scheme's frontier turning point
    MseProfile(Flags),
    /// Squeezing of the probe and final states along the QD frontier
    Squeezing(Flags),
    /// Sequential QD frontier per order and the composite response
    Sequential(Flags),
    /// Hybrid adaptive scheme against pair baselines under detection noise
    Hybrid(Flags),
    /// Husimi Q of each protocol stage
    Husimi(Flags),
    /// OQI limit on the prior-width grid
    Oqi(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Atom number N
    #[arg(long)]
    n: Option<usize>,
    /// Detection noise, one value or a comma-separated list
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    sigma_det: Option<Vec<f64>>,
    /// Prior width, one value or a comma-separated list
    #[arg(long, value_delimiter = ',', num_args = 1.., allow_negative_numbers = true)]
    delta_phi: Option<Vec<f64>>,
}

fn grid(values: Vec<f64>) -> Grid {
    match values.as_slice() {
        [x] => Grid::Scalar(*x),
        _ => Grid::List(values),
    }
}

fn config(experiment: Experiment, flags: Flags) -> Result<RunConfig, Error> {
    let mut cfg = match &flags.config {
        Some(path) => RunConfig::load(path, Some(experiment))?,
        None => RunConfig::defaults(experiment),
    };
    if let Some(seed) = flags.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = flags.out {
        cfg.out_dir = out;
    }
    if let Some(n) = flags.n {
        cfg.particles = n;
    }
    if let Some(v) = flags.sigma_det {
        cfg.sigma_det = grid(v);
    }
    if let Some(v) = flags.delta_phi {
        cfg.delta_phi = grid(v);
    }
    if let Some(k) = flags.threads {
        if k == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match cli.command {
        Command::Response(f) => (Experiment::Response, f),
        Command::Frontier(f) => (Experiment::Frontier, f),
        Command::MseProfile(f) => (Experiment::MseProfile, f),
        Command::Squeezing(f) => (Experiment::Squeezing, f),
        Command::Sequential(f) => (Experiment::Sequential, f),
        Command::Hybrid(f) => (Experiment::Hybrid, f),
        Command::Husimi(f) => (Experiment::Husimi, f),
        Command::Oqi(f) => (Experiment::Oqi, f),
    };
    match config(experiment, flags).and_then(|cfg| run(&cfg)) {
        Ok(manifest) => {
            let dir = manifest.config.out_dir.display();
            for f in &manifest.outputs {
                println!("{dir}/{}  {} bytes  sha256 {}", f.file, f.bytes, f.sha256);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qdsense {}: {e}", experiment.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
