//! Sequential deamplification: interleaving encodings with twists extends
//! the monotone response beyond [-pi, pi].
//!
//!     cargo run --release --example sequential [N]

use qdsense::estimation::gaussian_prior;
use qdsense::experiments::REFERENCE_SEQUENTIAL_TIMES;
use qdsense::optimize::{minimize_bmse, OptimizerConfig, Template};
use qdsense::protocol::{dynamic_range, response_curve, NoiseModel, ProtocolSpec};

fn main() -> qdsense::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let spec = ProtocolSpec::sequential(n, REFERENCE_SEQUENTIAL_TIMES.to_vec());
    let range = dynamic_range(&spec)?;
    println!("n = 2 with times {:?}: monotone on [{:.4}, {:.4}]", spec.times, range.lower, range.upper);
    let phis: Vec<f64> = (-8..=8).map(|k| k as f64 * 0.75).collect();
    for (phi, r) in phis.iter().zip(response_curve(&spec, &phis)?) {
        println!("  phi = {phi:+.2}  <S_y>/S = {r:+.4}");
    }

    let prior = gaussian_prior(0.9, 80)?;
    for order in 1..=3 {
        let tpl = Template::sequential(n, 1.0, order)?;
        let opt = minimize_bmse(&tpl, &prior, &NoiseModel::noiseless(), &tpl.default_space(), &OptimizerConfig::default(), &[])?;
        println!("order {order}: Delta phi / delta phi = {:.4} at delta phi = 0.9, times {:.5?}", opt.ratio, opt.spec.times);
    }
    Ok(())
}
