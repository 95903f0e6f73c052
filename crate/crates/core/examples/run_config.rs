//! Runs any experiment from a TOML config, as the CLI does, and checks the
//! manifest checksums afterwards.
//!
//!     cargo run --release --example run_config -- crates/core/configs/husimi.toml

use qdsense::experiments::{run, RunConfig, RunManifest};

fn main() -> qdsense::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/husimi.toml").to_string());
    let cfg = RunConfig::load(path.as_ref(), None)?;
    let manifest = run(&cfg)?;
    RunManifest::load(&cfg.out_dir)?.verify(&cfg.out_dir)?;
    for t in &manifest.timings {
        println!("{:<24} {:>8.3} s", t.stage, t.seconds);
    }
    for f in &manifest.outputs {
        println!("{}/{} ({} bytes)", cfg.out_dir.display(), f.file, f.bytes);
    }
    Ok(())
}
