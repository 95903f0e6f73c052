use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HybridSpec;
use crate::error::{Error, Result};
use crate::estimation::detection_noise_convolve;
use crate::protocol::TwistEngine;

const CHUNK: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub samples: usize,
    pub mse: f64,
    /// Standard error of `mse`.
    pub std_error: f64,
    pub reported: f64,
    /// (mse - reported) / std_error
    pub z: f64,
}

fn sample_index(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return k;
        }
    }
    p.len() - 1
}

/// Simulates phi ~ prior, sensor D's estimate, then sensor A on the residual,
/// and compares the empirical squared error of the summed estimate with
/// `reported`. Chunk c of 1000 samples uses stream c of a ChaCha generator
/// seeded with `seed`, so results do not depend on the thread count.
pub fn monte_carlo_total_mse(spec: &HybridSpec, reported: f64, samples: usize, seed: u64) -> Result<MonteCarloReport> {
    if samples < 2 {
        return Err(Error::InvalidSpec("need at least two samples".into()));
    }
    let engine_d = TwistEngine::for_spec(&spec.spec_d)?;
    let engine_a = TwistEngine::for_spec(&spec.spec_a)?;
    let run_d = engine_d.prepare(&spec.spec_d);
    let run_a = engine_a.prepare(&spec.spec_a);
    let m_d = engine_d.space().m_grid();
    let m_a = engine_a.space().m_grid();
    let sigma = spec.noise.sigma_det;
    let normal = Normal::new(0.0, spec.delta_phi).map_err(|e| Error::InvalidPrior(e.to_string()))?;

    let chunks = samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let phi = normal.sample(&mut rng);
                let p_d = detection_noise_convolve(&run_d.sy_probabilities(phi), sigma);
                let est_d = spec.gain_d * m_d[sample_index(&p_d, rng.random())];
                let residual = phi - est_d;
                let p_a = detection_noise_convolve(&run_a.sy_probabilities(residual), sigma);
                let est_a = spec.gain_a * m_a[sample_index(&p_a, rng.random())];
                let e2 = (residual - est_a).powi(2);
                s1 += e2;
                s2 += e2 * e2;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = samples as f64;
    let mse = s1 / n;
    let var = (s2 / n - mse * mse).max(0.0) * n / (n - 1.0);
    let std_error = (var / n).sqrt();
    Ok(MonteCarloReport {
        samples,
        mse,
        std_error,
        reported,
        z: if std_error > 0.0 { (mse - reported) / std_error } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{evaluate, gaussian_prior};
    use crate::hybrid::update_prior;
    use crate::protocol::{NoiseModel, ProtocolSpec};

    #[test]
    fn total_mse_matches_reported_bmse() {
        let noise = NoiseModel::new(1.0).unwrap();
        let dp = 0.5;
        let spec_d = ProtocolSpec::deamplified(30, 0.03, 0.015);
        let spec_a = ProtocolSpec::amplified(30, 0.04, -0.03);
        let d = evaluate(&spec_d, &gaussian_prior(dp, 80).unwrap(), &noise).unwrap();
        let up = update_prior(&spec_d, d.estimator.gain, dp, &noise, 2001).unwrap();
        let a = evaluate(&spec_a, &up.prior, &noise).unwrap();
        let spec = HybridSpec {
            spec_d,
            spec_a,
            gain_d: d.estimator.gain,
            gain_a: a.estimator.gain,
            noise,
            delta_phi: dp,
        };
        let r = monte_carlo_total_mse(&spec, a.bmse, 20_000, 5).unwrap();
        assert!(r.z.abs() < 3.0, "{r:?}");
        let again = monte_carlo_total_mse(&spec, a.bmse, 20_000, 5).unwrap();
        assert_eq!(r, again);
    }
}
