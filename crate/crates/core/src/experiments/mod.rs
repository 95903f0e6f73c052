//! Named experiments behind the CLI: each reads a [`RunConfig`], writes CSV
//! tables, gnuplot scripts and a checksummed [`RunManifest`].

mod config;
mod figures;
mod output;

pub use config::{Experiment, Grid, RunConfig, DEFAULT_SEED, REFERENCE_SEQUENTIAL_TIMES};
pub use figures::{
    husimi_stages, run_frontier, run_husimi, run_hybrid, run_mse_profile, run_oqi, run_response, run_sequential,
    run_squeezing, FrontierRun, OqiPoint, FRONTIER_FILE,
};
pub use output::{read_numeric_csv, Cell, OutputFile, Plot, RunManifest, RunWriter, Series, Table, Timing, MANIFEST_FILE};

use crate::error::Result;

/// Validates `config`, runs its experiment into `config.out_dir` and writes
/// the manifest.
pub fn run(config: &RunConfig) -> Result<RunManifest> {
    config.validate()?;
    let mut w = RunWriter::create(&config.out_dir)?;
    match config.experiment {
        Experiment::Response => run_response(config, &mut w).map(drop)?,
        Experiment::Frontier => run_frontier(config, &mut w).map(drop)?,
        Experiment::MseProfile => run_mse_profile(config, &mut w)?,
        Experiment::Squeezing => run_squeezing(config, &mut w)?,
        Experiment::Sequential => run_sequential(config, &mut w)?,
        Experiment::Hybrid => run_hybrid(config, &mut w)?,
        Experiment::Husimi => run_husimi(config, &mut w)?,
        Experiment::Oqi => run_oqi(config, &mut w).map(drop)?,
    }
    w.finish(config)
}
