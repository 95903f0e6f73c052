use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::noise::detection_noise_convolve;
use super::prior::Prior;
use crate::error::{Error, Result};
use crate::protocol::{NoiseModel, ProtocolSpec, TwistEngine};

/// Below this second moment the gain is set to zero.
pub const DEGENERATE_GAIN_THRESHOLD: f64 = 1e-14;

/// p(m | phi_j) for every prior node, one column per node.
#[derive(Clone, Debug)]
pub struct LikelihoodTable {
    outcomes: Vec<f64>,
    columns: Vec<Vec<f64>>,
    nodes: Vec<f64>,
    spec: ProtocolSpec,
    noise: NoiseModel,
}

pub fn build_likelihood(spec: &ProtocolSpec, prior: &Prior, noise: &NoiseModel) -> Result<LikelihoodTable> {
    let engine = TwistEngine::for_spec(spec)?;
    let prepared = engine.prepare(spec);
    let columns: Vec<Vec<f64>> = prior
        .nodes()
        .par_iter()
        .map(|&phi| detection_noise_convolve(&prepared.sy_probabilities(phi), noise.sigma_det))
        .collect();
    Ok(LikelihoodTable {
        outcomes: engine.space().m_grid(),
        columns,
        nodes: prior.nodes().to_vec(),
        spec: spec.clone(),
        noise: *noise,
    })
}

impl LikelihoodTable {
    /// Table from precomputed columns, e.g. for synthetic sensors.
    pub fn from_columns(outcomes: Vec<f64>, nodes: Vec<f64>, columns: Vec<Vec<f64>>, spec: ProtocolSpec, noise: NoiseModel) -> Result<Self> {
        if columns.len() != nodes.len() || columns.iter().any(|c| c.len() != outcomes.len()) {
            return Err(Error::InvalidSpec("likelihood columns do not match grids".into()));
        }
        Ok(Self {
            outcomes,
            columns,
            nodes,
            spec,
            noise,
        })
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn spec(&self) -> &ProtocolSpec {
        &self.spec
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    /// (sum_m m p, sum_m m^2 p) of column j.
    pub fn outcome_moments(&self, j: usize) -> (f64, f64) {
        self.columns[j]
            .iter()
            .zip(&self.outcomes)
            .fold((0.0, 0.0), |(a, b), (p, m)| (a + m * p, b + m * m * p))
    }

    fn check_prior(&self, prior: &Prior) -> Result<()> {
        if prior.nodes() != self.nodes.as_slice() {
            return Err(Error::InvalidPrior("prior nodes differ from table nodes".into()));
        }
        Ok(())
    }

    /// Prior-weighted sums (sum w phi^2, sum w phi <m>, sum w <m^2>).
    fn quadratic_form(&self, prior: &Prior) -> (f64, f64, f64) {
        let mut c = (0.0, 0.0, 0.0);
        for (j, (phi, w)) in prior.iter().enumerate() {
            let (m1, m2) = self.outcome_moments(j);
            c.0 += w * phi * phi;
            c.1 += w * phi * m1;
            c.2 += w * m2;
        }
        c
    }
}

/// Linear estimator phi_est(m) = gain * m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearEstimator {
    pub gain: f64,
}

impl LinearEstimator {
    pub fn estimate(&self, m: f64) -> f64 {
        self.gain * m
    }
}

pub fn optimal_linear_gain(table: &LikelihoodTable, prior: &Prior) -> Result<LinearEstimator> {
    table.check_prior(prior)?;
    let (_, num, den) = table.quadratic_form(prior);
    let gain = if den < DEGENERATE_GAIN_THRESHOLD { 0.0 } else { num / den };
    Ok(LinearEstimator { gain })
}

/// BMSE of a given linear estimator over the table's prior nodes.
pub fn bmse_with_estimator(table: &LikelihoodTable, prior: &Prior, est: LinearEstimator) -> Result<f64> {
    table.check_prior(prior)?;
    let (s2, num, den) = table.quadratic_form(prior);
    let a = est.gain;
    Ok((s2 - 2.0 * a * num + a * a * den).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BmseReport {
    /// (Delta phi)^2
    pub bmse: f64,
    pub estimator: LinearEstimator,
}

impl BmseReport {
    /// Delta phi / delta phi for a prior of second moment `prior_variance`.
    pub fn ratio(&self, prior_variance: f64) -> f64 {
        (self.bmse / prior_variance).sqrt()
    }
}

/// BMSE with the optimal linear gain.
pub fn evaluate(spec: &ProtocolSpec, prior: &Prior, noise: &NoiseModel) -> Result<BmseReport> {
    let table = build_likelihood(spec, prior, noise)?;
    let estimator = optimal_linear_gain(&table, prior)?;
    let bmse = bmse_with_estimator(&table, prior, estimator)?;
    Ok(BmseReport { bmse, estimator })
}

pub fn bmse(spec: &ProtocolSpec, prior: &Prior, noise: &NoiseModel) -> Result<f64> {
    Ok(evaluate(spec, prior, noise)?.bmse)
}

/// epsilon(phi) = sum_m (phi - a m)^2 p(m | phi) on each grid point.
pub fn mse_profile(spec: &ProtocolSpec, est: LinearEstimator, phi_grid: &[f64], noise: &NoiseModel) -> Result<Vec<f64>> {
    let engine = TwistEngine::for_spec(spec)?;
    let prepared = engine.prepare(spec);
    let m = engine.space().m_grid();
    Ok(phi_grid
        .par_iter()
        .map(|&phi| {
            let p = detection_noise_convolve(&prepared.sy_probabilities(phi), noise.sigma_det);
            p.iter()
                .zip(&m)
                .map(|(pk, mk)| (phi - est.estimate(*mk)).powi(2) * pk)
                .sum()
        })
        .collect())
}

/// Uniform grid of `points` phases on [-pi, pi].
pub fn profile_grid(points: usize) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| -pi + 2.0 * pi * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::gaussian_prior;
    use crate::protocol::outcome_distribution;
    use crate::spin::SpinSpace;

    fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = hi - r * (hi - lo);
        let mut d = lo + r * (hi - lo);
        while hi - lo > tol {
            if f(c) < f(d) {
                hi = d;
            } else {
                lo = c;
            }
            c = hi - r * (hi - lo);
            d = lo + r * (hi - lo);
        }
        0.5 * (lo + hi)
    }

    /// BMSE by the defining double sum, independent of the moment shortcut.
    fn direct_bmse(table: &LikelihoodTable, prior: &Prior, a: f64) -> f64 {
        prior
            .iter()
            .enumerate()
            .map(|(j, (phi, w))| {
                w * table
                    .column(j)
                    .iter()
                    .zip(table.outcomes())
                    .map(|(p, m)| (phi - a * m).powi(2) * p)
                    .sum::<f64>()
            })
            .sum()
    }

    #[test]
    fn gain_matches_golden_section_scan() {
        let spec = ProtocolSpec::classical(100);
        let prior = gaussian_prior(0.1, 80).unwrap();
        let table = build_likelihood(&spec, &prior, &NoiseModel::noiseless()).unwrap();
        let a = optimal_linear_gain(&table, &prior).unwrap().gain;
        let scan = golden_section(|a| direct_bmse(&table, &prior, a), 0.0, 0.2, 1e-9);
        assert!((a - scan).abs() < 1e-6, "{a} vs {scan}");
        let b = bmse_with_estimator(&table, &prior, LinearEstimator { gain: a }).unwrap();
        assert!((b - direct_bmse(&table, &prior, a)).abs() < 1e-14);
    }

    #[test]
    fn flat_likelihood_has_zero_gain() {
        let prior = gaussian_prior(0.4, 20).unwrap();
        let outcomes = vec![1.0, 0.0, -1.0];
        let cols = vec![vec![0.25, 0.5, 0.25]; 20];
        let table = LikelihoodTable::from_columns(
            outcomes,
            prior.nodes().to_vec(),
            cols,
            ProtocolSpec::classical(2),
            NoiseModel::noiseless(),
        )
        .unwrap();
        let a = optimal_linear_gain(&table, &prior).unwrap().gain;
        assert!(a.abs() < 1e-12);
    }

    #[test]
    fn deterministic_linear_sensor_inverts_gain() {
        let g = 50.0;
        let prior = gaussian_prior(0.5, 80).unwrap();
        let outcomes: Vec<f64> = (-200..=200).rev().map(|m| m as f64).collect();
        let cols: Vec<Vec<f64>> = prior
            .nodes()
            .iter()
            .map(|phi| {
                let m = (g * phi).round().clamp(-200.0, 200.0);
                outcomes.iter().map(|o| if *o == m { 1.0 } else { 0.0 }).collect()
            })
            .collect();
        let table = LikelihoodTable::from_columns(
            outcomes,
            prior.nodes().to_vec(),
            cols,
            ProtocolSpec::classical(400),
            NoiseModel::noiseless(),
        )
        .unwrap();
        let a = optimal_linear_gain(&table, &prior).unwrap().gain;
        assert!((a * g - 1.0).abs() < 0.02, "{a}");
    }

    #[test]
    fn zero_gain_returns_prior_variance() {
        let prior = gaussian_prior(0.3, 80).unwrap();
        let table = build_likelihood(&ProtocolSpec::squeezed(20, 0.02), &prior, &NoiseModel::noiseless()).unwrap();
        let b = bmse_with_estimator(&table, &prior, LinearEstimator { gain: 0.0 }).unwrap();
        assert!((b - 0.09).abs() < 1e-12);
    }

    #[test]
    fn classical_bmse_matches_gaussian_model() {
        let spec = ProtocolSpec::classical(100);
        let s2 = 1.0 / 100.0;
        for dp in [0.05, 0.1, 0.2, 0.3] {
            let b = bmse(&spec, &gaussian_prior(dp, 80).unwrap(), &NoiseModel::noiseless()).unwrap();
            let v = dp * dp;
            let model = v * s2 / (v + s2);
            assert!((b / model - 1.0).abs() < 0.05, "dp={dp}: {b} vs {model}");
            assert!(b <= v + 1e-12);
        }
    }

    #[test]
    fn optimum_is_stationary_under_perturbation() {
        let prior = gaussian_prior(0.5, 80).unwrap();
        let table =
            build_likelihood(&ProtocolSpec::deamplified(100, 0.0135, 0.0072), &prior, &NoiseModel::noiseless()).unwrap();
        let est = optimal_linear_gain(&table, &prior).unwrap();
        let best = bmse_with_estimator(&table, &prior, est).unwrap();
        for f in [0.99, 1.01] {
            let other = bmse_with_estimator(&table, &prior, LinearEstimator { gain: est.gain * f }).unwrap();
            assert!(other >= best);
        }
    }

    #[test]
    fn noise_never_helps() {
        let spec = ProtocolSpec::deamplified(60, 0.02, 0.01);
        let prior = gaussian_prior(0.4, 60).unwrap();
        let values: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0]
            .iter()
            .map(|&s| bmse(&spec, &prior, &NoiseModel::new(s).unwrap()).unwrap())
            .collect();
        assert!(values.windows(2).all(|w| w[0] <= w[1] + 1e-10), "{values:?}");
    }

    #[test]
    fn quadrature_converges() {
        let spec = ProtocolSpec::deamplified(100, 0.0135, 0.0072);
        for dp in [0.2, 0.6, 1.0] {
            let a = bmse(&spec, &gaussian_prior(dp, 60).unwrap(), &NoiseModel::noiseless()).unwrap();
            let b = bmse(&spec, &gaussian_prior(dp, 120).unwrap(), &NoiseModel::noiseless()).unwrap();
            assert!((a - b).abs() <= 1e-6, "dp={dp}: {a} vs {b}");
        }
    }

    #[test]
    fn table_columns_match_direct_calls() {
        let spec = ProtocolSpec::classical(30);
        let noise = NoiseModel::new(1.5).unwrap();
        let prior = gaussian_prior(0.5, 1).unwrap();
        let table = build_likelihood(&spec, &prior, &noise).unwrap();
        assert_eq!(table.column(0), outcome_distribution(&spec, 0.0, &noise).unwrap().as_slice());
        let prior = gaussian_prior(0.5, 15).unwrap();
        let table = build_likelihood(&spec, &prior, &noise).unwrap();
        for j in 0..15 {
            assert!((table.column(j).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mse_profile_identities() {
        let spec = ProtocolSpec::deamplified(100, 0.0135, 0.0072);
        let est = LinearEstimator { gain: 0.03 };
        let grid = profile_grid(41);
        let noise = NoiseModel::noiseless();
        let eps = mse_profile(&spec, est, &grid, &noise).unwrap();
        let m = SpinSpace::new(100).unwrap().m_grid();
        for (phi, e) in grid.iter().zip(&eps) {
            assert!(*e >= 0.0);
            let p = outcome_distribution(&spec, *phi, &noise).unwrap();
            let mean: f64 = p.iter().zip(&m).map(|(a, b)| a * b).sum();
            let var: f64 = p.iter().zip(&m).map(|(a, b)| a * (b - mean).powi(2)).sum();
            let split = (phi - est.gain * mean).powi(2) + est.gain.powi(2) * var;
            assert!((e - split).abs() < 1e-10);
        }
        let css = mse_profile(&ProtocolSpec::classical(100), est, &[0.0], &noise).unwrap();
        assert!((css[0] - 0.03f64.powi(2) * 25.0).abs() < 1e-12);
    }
}
