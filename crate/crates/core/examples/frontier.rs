//! Optimized Delta phi / delta phi of CSS, SSS and QD across prior widths,
//! with the optimal-interferometer limit alongside.
//!
//!     cargo run --release --example frontier [N]

use qdsense::estimation::gaussian_prior;
use qdsense::optimize::{sweep_prior, OptimizerConfig, Template};
use qdsense::oqi::{oqi_limit, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};
use qdsense::protocol::{NoiseModel, TwistEngine};
use qdsense::spin::SpinSpace;

fn main() -> qdsense::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(100);
    let widths = [0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 1.0];
    let templates = [Template::classical(n, 1.0), Template::squeezed(n, 1.0), Template::deamplified(n, 1.0)];
    let table = sweep_prior(&templates, &widths, &NoiseModel::noiseless(), &OptimizerConfig::default(), 80)?;

    let space = SpinSpace::new(n)?;
    let engine = TwistEngine::shared(n, 1.0)?;
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}   QD times", "dphi", "CSS", "SSS", "QD", "OQI");
    for (j, &d) in widths.iter().enumerate() {
        let prior = gaussian_prior(d, 80)?;
        let qd = &table.curve("qd").unwrap().points[j];
        let seeds = [engine.probe(qd.times[0])];
        let oqi = oqi_limit(&space, &prior, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER, &seeds)?;
        let r = |label: &str| table.curve(label).unwrap().points[j].ratio;
        println!(
            "{d:>6.3} {:>8.4} {:>8.4} {:>8.4} {:>8.4}   ({:.5}, {:.5})",
            r("css"),
            r("sss"),
            r("qd"),
            oqi.ratio(&prior),
            qd.times[0],
            qd.times[1]
        );
    }
    for c in &table.curves {
        let best = c.best();
        println!("{}: minimum {:.4} at delta phi = {:.3}", c.label, best.ratio, best.delta_phi);
    }
    Ok(())
}
