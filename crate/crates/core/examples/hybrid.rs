//! Hybrid adaptive sensing: a deamplifying sensor makes a coarse estimate and
//! an amplifying sensor reads the residual, compared with pairs of identical
//! sensors and checked by Monte-Carlo simulation.
//!
//!     cargo run --release --example hybrid [sigma_det]

use qdsense::estimation::gaussian_prior;
use qdsense::hybrid::{baseline_pair_bmse, monte_carlo_total_mse, optimize_hybrid, HybridConfig};
use qdsense::optimize::Template;
use qdsense::protocol::NoiseModel;

fn main() -> qdsense::Result<()> {
    let sigma: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2.0);
    let (n, d) = (100, 0.5);
    let cfg = HybridConfig::new(n, 1.0);
    let h = optimize_hybrid(d, sigma, &cfg)?;
    println!("sensor D times {:.5?}, gain {:.5}", h.spec.spec_d.times, h.spec.gain_d);
    println!("sensor A times {:.5?}, gain {:.5}", h.spec.spec_a.times, h.spec.gain_a);
    println!("updated prior: {} nodes, rms {:.5}", h.updated.prior.len(), h.updated.prior.rms());
    println!("hybrid Delta phi / delta phi = {:.4}", h.ratio);

    let prior = gaussian_prior(d, cfg.nodes)?;
    let noise = NoiseModel::new(sigma)?;
    let qd = Template::deamplified(n, 1.0);
    let qa = Template::amplified(n, 1.0);
    let qd_pair = baseline_pair_bmse(&qd, &qd.default_space(), &prior, &noise, &cfg.optimizer)?;
    let qa_pair = baseline_pair_bmse(&qa, &qa.amplifying_space(), &prior, &noise, &cfg.optimizer)?;
    println!("QD pair {:.4}, QA pair {:.4}", qd_pair.ratio, qa_pair.ratio);

    let mc = monte_carlo_total_mse(&h.spec, h.total_bmse, 100_000, 7)?;
    println!("Monte-Carlo MSE {:.5e} +- {:.1e} vs {:.5e} (z = {:.2})", mc.mse, mc.std_error, mc.reported, mc.z);
    Ok(())
}
