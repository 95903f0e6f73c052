//! Wineland squeezing along the phi = 0 twisting trajectory of optimized QD
//! protocols: the second twist squeezes further than the probe.
//!
//!     cargo run --release --example squeezing [N]

use qdsense::estimation::gaussian_prior;
use qdsense::optimize::{default_time_bound, minimize_bmse, squeezing_scan, squeezing_trace, OptimizerConfig, Template};
use qdsense::protocol::NoiseModel;

fn main() -> qdsense::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let (t_best, xi_best) = squeezing_scan(n, 1.0, default_time_bound(n, 1.0), 1e-4)?;
    println!("single-twist optimum: xi^2 = {xi_best:.5} at t = {t_best:.5}");

    let qd = Template::deamplified(n, 1.0);
    println!("{:>6} {:>9} {:>9} {:>10} {:>10}", "dphi", "t1", "t2", "xi2 probe", "xi2 final");
    for d in [0.2, 0.5, 1.0] {
        let opt = minimize_bmse(&qd, &gaussian_prior(d, 80)?, &NoiseModel::noiseless(), &qd.default_space(), &OptimizerConfig::default(), &[])?;
        let tr = squeezing_trace(&opt.spec, 1e-4)?;
        println!(
            "{d:>6.2} {:>9.5} {:>9.5} {:>10.5} {:>10.5}",
            opt.spec.times[0], opt.spec.times[1], tr.probe_xi2, tr.final_xi2
        );
    }
    Ok(())
}
