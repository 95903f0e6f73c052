//! Optimal quantum interferometer: alternating probe / Personick-observable
//! optimization of the Bayesian MSE for a Gaussian prior.
//!
//!     cargo run --release --example oqi [N]

use qdsense::estimation::gaussian_prior;
use qdsense::oqi::{oqi_limit, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use qdsense::spin::SpinSpace;

fn main() -> qdsense::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let space = SpinSpace::new(n)?;
    println!("{:>6} {:>10} {:>11} {:>10}", "dphi", "ratio", "iterations", "converged");
    for d in [0.3, 0.5, 0.65, 0.8, 1.0] {
        let prior = gaussian_prior(d, 80)?;
        let r = oqi_limit(&space, &prior, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER, &[])?;
        println!("{d:>6.2} {:>10.5} {:>11} {:>10}", r.ratio(&prior), r.iterations, r.converged);
    }
    Ok(())
}
