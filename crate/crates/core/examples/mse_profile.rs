//! Conditional mean squared error across [-pi, pi]: the deamplified sensor
//! stays accurate far from zero phase where the classical one slips.
//!
//!     cargo run --release --example mse_profile [N]

use qdsense::estimation::{evaluate, gaussian_prior, mse_profile};
use qdsense::optimize::{minimize_bmse, OptimizerConfig, Template};
use qdsense::protocol::NoiseModel;

fn main() -> qdsense::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let prior = gaussian_prior(0.65, 80)?;
    let noise = NoiseModel::noiseless();
    let cfg = OptimizerConfig::default();
    let phis: Vec<f64> = (-6..=6).map(|k| k as f64 * 0.5).collect();

    println!("{:>6} {:>12} {:>12}", "phi", "CSS", "QD");
    let css = Template::classical(n, 1.0);
    let css_est = evaluate(&css.base, &prior, &noise)?.estimator;
    let qd = Template::deamplified(n, 1.0);
    let best = minimize_bmse(&qd, &prior, &noise, &qd.default_space(), &cfg, &[])?;
    let a = mse_profile(&css.base, css_est, &phis, &noise)?;
    let b = mse_profile(&best.spec, best.estimator, &phis, &noise)?;
    for ((phi, x), y) in phis.iter().zip(&a).zip(&b) {
        println!("{phi:>6.2} {x:>12.5e} {y:>12.5e}");
    }
    Ok(())
}
