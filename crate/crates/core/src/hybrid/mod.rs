//! Two-sensor adaptive scheme: a deamplifying sensor D makes a coarse
//! estimate, its estimator comb sets the prior of an amplifying sensor A that
//! measures the residual phase.

mod montecarlo;

pub use montecarlo::{monte_carlo_total_mse, MonteCarloReport};

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{
    build_likelihood, detection_noise_convolve, evaluate, gaussian_prior, BmseReport, LinearEstimator, Prior,
    DEGENERATE_GAIN_THRESHOLD,
};
use crate::optimize::{minimize_bmse, minimize_objective, nelder_mead, OptResult, OptimizerConfig, SearchSpace, Template};
use crate::protocol::{NoiseModel, ProtocolSpec, TwistEngine};

/// Residual-grid size for updated priors.
pub const RESIDUAL_POINTS: usize = 2001;
/// Updated-prior weights below this fraction of the largest are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Default order of the reduced rule used while searching sensor A's times.
pub const SEARCH_NODES: usize = 120;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub particles: usize,
    pub chi: f64,
    /// Gauss-Hermite order of the base prior.
    pub nodes: usize,
    pub residual_points: usize,
    /// Gauss rule order standing in for the updated prior during sensor A's
    /// search; the reported BMSE always uses the full residual grid.
    pub search_nodes: usize,
    pub optimizer: OptimizerConfig,
    /// Re-optimize all four times jointly after the staged search.
    pub joint_refinement: bool,
}

impl HybridConfig {
    pub fn new(particles: usize, chi: f64) -> Self {
        Self {
            particles,
            chi,
            nodes: crate::estimation::DEFAULT_NODES,
            residual_points: RESIDUAL_POINTS,
            search_nodes: SEARCH_NODES,
            optimizer: OptimizerConfig::default(),
            joint_refinement: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridSpec {
    pub spec_d: ProtocolSpec,
    pub spec_a: ProtocolSpec,
    pub gain_d: f64,
    pub gain_a: f64,
    pub noise: NoiseModel,
    pub delta_phi: f64,
}

/// Prior of sensor A's residual phase after sensor D's estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdatedPrior {
    pub prior: Prior,
    pub spec_d: ProtocolSpec,
    pub gain_d: f64,
    pub delta_phi: f64,
    pub sigma_det: f64,
}

/// Beyond this many prior widths the Gaussian density is dropped.
const PRIOR_REACH: f64 = 9.0;

/// Uniform symmetric grid on [-R, R] with R = max(pi, 9 delta_phi + max_shift),
/// where `max_shift` bounds |a m| over the estimator's outcomes. This keeps
/// the residuals of rare phase slips on the grid.
pub fn residual_grid(delta_phi: f64, max_shift: f64, points: usize) -> Vec<f64> {
    let r = PI.max(PRIOR_REACH * delta_phi + max_shift.abs());
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points)
            .map(|i| -r + 2.0 * r * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

fn gaussian_density(x: f64, delta_phi: f64) -> f64 {
    (-0.5 * (x / delta_phi).powi(2)).exp() / (delta_phi * (2.0 * PI).sqrt())
}

/// P_A(phi) = sum_m P(a m + phi) p(m | a m + phi) on the residual grid, for a
/// sensor with outcome grid `outcomes` and likelihood `likelihood(theta)`.
pub fn update_prior_with<F>(outcomes: &[f64], likelihood: F, gain: f64, delta_phi: f64, grid: &[f64]) -> Result<Prior>
where
    F: Fn(f64) -> Vec<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid("residual phases"));
    }
    if !(delta_phi > 0.0) {
        return Err(Error::InvalidPrior("delta_phi must be positive".into()));
    }
    let reach = PRIOR_REACH * delta_phi;
    let weights: Vec<f64> = grid
        .par_iter()
        .map(|&phi| {
            outcomes
                .iter()
                .enumerate()
                .filter_map(|(k, &m)| {
                    let theta = gain * m + phi;
                    (theta.abs() <= reach).then(|| gaussian_density(theta, delta_phi) * likelihood(theta)[k])
                })
                .sum()
        })
        .collect();
    Prior::tabulated(grid.to_vec(), weights)
}

pub fn update_prior(
    spec_d: &ProtocolSpec,
    gain_d: f64,
    delta_phi: f64,
    noise: &NoiseModel,
    points: usize,
) -> Result<UpdatedPrior> {
    let engine = TwistEngine::for_spec(spec_d)?;
    let prepared = engine.prepare(spec_d);
    let outcomes = engine.space().m_grid();
    let grid = residual_grid(delta_phi, gain_d * engine.space().spin(), points);
    let likelihood = |theta: f64| detection_noise_convolve(&prepared.sy_probabilities(theta), noise.sigma_det);
    let prior = update_prior_with(&outcomes, likelihood, gain_d, delta_phi, &grid)?.pruned(PRUNE_THRESHOLD);
    Ok(UpdatedPrior {
        prior,
        spec_d: spec_d.clone(),
        gain_d,
        delta_phi,
        sigma_det: noise.sigma_det,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridResult {
    pub spec: HybridSpec,
    pub sensor_d: OptResult,
    pub sensor_a: OptResult,
    pub updated: UpdatedPrior,
    /// Sensor A's BMSE under the updated prior.
    pub total_bmse: f64,
    /// sqrt(total_bmse) / delta_phi
    pub ratio: f64,
}

fn stage_a(
    updated: &UpdatedPrior,
    noise: &NoiseModel,
    config: &HybridConfig,
    seeds: &[ProtocolSpec],
) -> Result<OptResult> {
    let tpl = Template::amplified(config.particles, config.chi);
    let search = updated.prior.reduced(config.search_nodes)?;
    let found = minimize_bmse(&tpl, &search, noise, &tpl.default_space(), &config.optimizer, seeds)?;
    let full = evaluate(&found.spec, &updated.prior, noise)?;
    Ok(OptResult {
        bmse: full.bmse,
        ratio: full.ratio(updated.prior.second_moment()),
        estimator: full.estimator,
        ..found
    })
}

/// Staged optimization: sensor D against the Gaussian prior, then sensor A
/// (sign-free times) against the prior updated by D's estimate.
pub fn optimize_hybrid(delta_phi: f64, sigma_det: f64, config: &HybridConfig) -> Result<HybridResult> {
    let noise = NoiseModel::new(sigma_det)?;
    let base = gaussian_prior(delta_phi, config.nodes)?;
    let tpl_d = Template::deamplified(config.particles, config.chi);
    let sensor_d = minimize_bmse(&tpl_d, &base, &noise, &tpl_d.default_space(), &config.optimizer, &[])?;
    let updated = update_prior(&sensor_d.spec, sensor_d.estimator.gain, delta_phi, &noise, config.residual_points)?;
    let sensor_a = stage_a(&updated, &noise, config, &[])?;
    let mut result = assemble(delta_phi, noise, sensor_d, updated, sensor_a);
    if config.joint_refinement {
        result = refine_jointly(result, config)?;
    }
    Ok(result)
}

fn assemble(delta_phi: f64, noise: NoiseModel, sensor_d: OptResult, updated: UpdatedPrior, sensor_a: OptResult) -> HybridResult {
    let total_bmse = sensor_a.bmse;
    HybridResult {
        spec: HybridSpec {
            spec_d: sensor_d.spec.clone(),
            spec_a: sensor_a.spec.clone(),
            gain_d: sensor_d.estimator.gain,
            gain_a: sensor_a.estimator.gain,
            noise,
            delta_phi,
        },
        sensor_d,
        sensor_a,
        updated,
        total_bmse,
        ratio: total_bmse.sqrt() / delta_phi,
    }
}

/// Total BMSE for given D times: D's optimal gain, updated prior, then A's
/// BMSE with A's optimal gain.
fn total_for(
    spec_d: &ProtocolSpec,
    spec_a: &ProtocolSpec,
    base: &Prior,
    noise: &NoiseModel,
    points: usize,
    search_nodes: Option<usize>,
) -> Result<(f64, UpdatedPrior, BmseReport, BmseReport)> {
    let d = evaluate(spec_d, base, noise)?;
    let updated = update_prior(spec_d, d.estimator.gain, base.rms(), noise, points)?;
    let a = match search_nodes {
        Some(k) => evaluate(spec_a, &updated.prior.reduced(k)?, noise)?,
        None => evaluate(spec_a, &updated.prior, noise)?,
    };
    Ok((a.bmse, updated, d, a))
}

fn refine_jointly(staged: HybridResult, config: &HybridConfig) -> Result<HybridResult> {
    let delta_phi = staged.spec.delta_phi;
    let noise = staged.spec.noise;
    let base = gaussian_prior(delta_phi, config.nodes)?;
    let tpl_d = Template::deamplified(config.particles, config.chi);
    let tpl_a = Template::amplified(config.particles, config.chi);
    let mut bounds = tpl_d.default_space().bounds().to_vec();
    bounds.extend_from_slice(tpl_a.default_space().bounds());
    let space = SearchSpace::new(bounds)?;
    let split = |x: &[f64]| (tpl_d.spec_at(&x[..2]), tpl_a.spec_at(&x[2..]));
    let f = |x: &[f64]| {
        let (d, a) = split(x);
        total_for(&d, &a, &base, &noise, config.residual_points, Some(config.search_nodes))
            .map(|r| r.0)
            .unwrap_or(f64::INFINITY)
    };
    let mut start = staged.spec.spec_d.times.clone();
    start.extend_from_slice(&staged.spec.spec_a.times);
    let trace = nelder_mead(f, &start, &space, config.optimizer.max_evaluations, config.optimizer.tolerance);
    let (spec_d, spec_a) = split(&trace.point);
    let (total, updated, d, a) = total_for(&spec_d, &spec_a, &base, &noise, config.residual_points, None)?;
    if !(total < staged.total_bmse) {
        return Ok(staged);
    }
    let sensor_d = OptResult {
        spec: spec_d,
        bmse: d.bmse,
        ratio: d.ratio(base.second_moment()),
        estimator: d.estimator,
        evaluations: staged.sensor_d.evaluations + trace.evaluations,
        traces: staged.sensor_d.traces.clone(),
    };
    let sensor_a = OptResult {
        spec: spec_a,
        bmse: a.bmse,
        ratio: a.ratio(updated.prior.second_moment()),
        estimator: a.estimator,
        evaluations: staged.sensor_a.evaluations,
        traces: vec![trace],
    };
    Ok(assemble(delta_phi, noise, sensor_d, updated, sensor_a))
}

/// (E[phi^2], E[phi <m>], E[((m1 + m2)/2)^2]) over the prior.
fn pair_form(spec: &ProtocolSpec, prior: &Prior, noise: &NoiseModel) -> Result<(f64, f64, f64)> {
    let table = build_likelihood(spec, prior, noise)?;
    let mut c = (0.0, 0.0, 0.0);
    for (j, (phi, w)) in prior.iter().enumerate() {
        let (m1, m2) = table.outcome_moments(j);
        c.0 += w * phi * phi;
        c.1 += w * phi * m1;
        c.2 += w * 0.5 * (m2 + m1 * m1);
    }
    Ok(c)
}

/// BMSE of two independent copies of `spec` read out with phi = a (m1 + m2)/2.
pub fn pair_bmse_with_estimator(spec: &ProtocolSpec, prior: &Prior, noise: &NoiseModel, est: LinearEstimator) -> Result<f64> {
    let (s2, num, den) = pair_form(spec, prior, noise)?;
    let a = est.gain;
    Ok((s2 - 2.0 * a * num + a * a * den).max(0.0))
}

/// Pair BMSE with the optimal gain.
pub fn pair_bmse(spec: &ProtocolSpec, prior: &Prior, noise: &NoiseModel) -> Result<BmseReport> {
    let (s2, num, den) = pair_form(spec, prior, noise)?;
    let gain = if den < DEGENERATE_GAIN_THRESHOLD { 0.0 } else { num / den };
    Ok(BmseReport {
        bmse: (s2 - 2.0 * gain * num + gain * gain * den).max(0.0),
        estimator: LinearEstimator { gain },
    })
}

/// Pair baseline with the template's times optimized for the pair estimate.
pub fn baseline_pair_bmse(
    template: &Template,
    space: &SearchSpace,
    prior: &Prior,
    noise: &NoiseModel,
    config: &OptimizerConfig,
) -> Result<OptResult> {
    let eval = |spec: &ProtocolSpec| pair_bmse(spec, prior, noise);
    minimize_objective(template, space, config, &[], prior.second_moment(), &eval)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRow {
    pub sigma_det: f64,
    /// Delta phi / delta phi of each scheme.
    pub css_pair: f64,
    pub qd_pair: f64,
    pub qa_pair: f64,
    pub hybrid: f64,
    pub hybrid_bmse: f64,
    pub hybrid_spec: HybridSpec,
}

impl NoiseRow {
    /// Sensor D times followed by sensor A times.
    pub fn hybrid_times(&self) -> [f64; 4] {
        let (d, a) = (&self.hybrid_spec.spec_d.times, &self.hybrid_spec.spec_a.times);
        [d[0], d[1], a[0], a[1]]
    }

    /// (QD pair, QA pair, hybrid) relative to the classical pair.
    pub fn relative(&self) -> [f64; 3] {
        [self.qd_pair / self.css_pair, self.qa_pair / self.css_pair, self.hybrid / self.css_pair]
    }
}

pub fn noise_sweep(sigma_grid: &[f64], delta_phi: f64, config: &HybridConfig) -> Result<Vec<NoiseRow>> {
    if sigma_grid.is_empty() {
        return Err(Error::EmptyGrid("detection noise levels"));
    }
    let prior = gaussian_prior(delta_phi, config.nodes)?;
    let (n, chi) = (config.particles, config.chi);
    sigma_grid
        .iter()
        .map(|&sigma| {
            let noise = NoiseModel::new(sigma)?;
            let opt = &config.optimizer;
            let pair = |tpl: Template, space: SearchSpace| baseline_pair_bmse(&tpl, &space, &prior, &noise, opt);
            let css = Template::classical(n, chi);
            let qd = Template::deamplified(n, chi);
            let qa = Template::amplified(n, chi);
            let css = pair(css.clone(), css.default_space())?;
            let qd = pair(qd.clone(), qd.default_space())?;
            let qa = pair(qa.clone(), qa.amplifying_space())?;
            let hybrid = optimize_hybrid(delta_phi, sigma, config)?;
            Ok(NoiseRow {
                sigma_det: sigma,
                css_pair: css.ratio,
                qd_pair: qd.ratio,
                qa_pair: qa.ratio,
                hybrid: hybrid.ratio,
                hybrid_bmse: hybrid.total_bmse,
                hybrid_spec: hybrid.spec,
            })
        })
        .collect()
}
