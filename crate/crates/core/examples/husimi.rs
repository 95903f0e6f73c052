//! Husimi Q of each stage of a sequential protocol, with its peak and the
//! anisotropy that twisting builds up.
//!
//!     cargo run --release --example husimi [phase]

use std::f64::consts::PI;

use qdsense::experiments::{husimi_stages, REFERENCE_SEQUENTIAL_TIMES};
use qdsense::protocol::ProtocolSpec;
use qdsense::spin::husimi_q;

fn main() -> qdsense::Result<()> {
    let phase: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(0.5);
    let spec = ProtocolSpec::sequential(100, REFERENCE_SEQUENTIAL_TIMES.to_vec());
    let theta: Vec<f64> = (0..=90).map(|i| PI * i as f64 / 90.0).collect();
    let phi: Vec<f64> = (0..180).map(|j| -PI + 2.0 * PI * j as f64 / 180.0).collect();
    println!("{:>9} {:>8} {:>8} {:>7} {:>11}", "stage", "theta", "phi", "Q max", "anisotropy");
    for (label, state) in husimi_stages(&spec, phase)? {
        let q = husimi_q(&state, &theta, &phi)?;
        let (t, p, v) = q.peak();
        let (major, minor) = q.tangent_widths();
        println!("{label:>9} {t:>8.4} {p:>8.4} {v:>7.4} {:>11.3}", major / minor);
    }
    Ok(())
}
