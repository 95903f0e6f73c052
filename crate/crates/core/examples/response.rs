//! Response curves and dynamic ranges of the classical, amplified and
//! deamplified interferometers at N = 100.
//!
//!     cargo run --release --example response [N]

use qdsense::estimation::gaussian_prior;
use qdsense::optimize::{minimize_bmse, OptimizerConfig, Template};
use qdsense::protocol::{dynamic_range, response_curve, NoiseModel, ProtocolSpec};

fn main() -> qdsense::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let cfg = OptimizerConfig::default();

    // Deamplification tuned for a wide prior, amplification for a narrow one
    // read out through detection noise.
    let qd_tpl = Template::deamplified(n, 1.0);
    let qd = minimize_bmse(&qd_tpl, &gaussian_prior(0.5, 80)?, &NoiseModel::noiseless(), &qd_tpl.default_space(), &cfg, &[])?;
    let qa_tpl = Template::amplified(n, 1.0);
    let qa = minimize_bmse(&qa_tpl, &gaussian_prior(0.2, 80)?, &NoiseModel::new(2.0)?, &qa_tpl.amplifying_space(), &cfg, &[])?;

    let schemes = [("CSS", ProtocolSpec::classical(n)), ("QA", qa.spec), ("QD", qd.spec)];
    let phis = [-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0];
    println!("{:>6} {:>24} {:>22}   <S_y>/S at phi = {phis:?}", "scheme", "times", "monotone range");
    for (name, spec) in &schemes {
        let r = dynamic_range(spec)?;
        let curve = response_curve(spec, &phis)?;
        let times: Vec<String> = spec.times.iter().map(|t| format!("{t:.5}")).collect();
        let values: Vec<String> = curve.iter().map(|v| format!("{v:+.3}")).collect();
        println!("{name:>6} {:>24} [{:+.4}, {:+.4}]   {}", times.join(", "), r.lower, r.upper, values.join(" "));
    }
    Ok(())
}
