use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simplex::{best_trace, multistart, nelder_mead, OptimizerConfig, SearchSpace, StartTrace};
use super::template::Template;
use crate::error::{Error, Result};
use crate::estimation::{evaluate, gaussian_prior, BmseReport, LinearEstimator, Prior};
use crate::protocol::{NoiseModel, ProtocolSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub spec: ProtocolSpec,
    pub bmse: f64,
    /// Delta phi / delta phi
    pub ratio: f64,
    pub estimator: LinearEstimator,
    pub evaluations: usize,
    pub traces: Vec<StartTrace>,
}

impl OptResult {
    pub fn times(&self) -> &[f64] {
        &self.spec.times
    }
}

/// Protocol evaluator used by the searches.
pub type Evaluator<'a> = dyn Fn(&ProtocolSpec) -> Result<BmseReport> + Sync + 'a;

fn objective<'a>(template: &'a Template, eval: &'a Evaluator<'a>) -> impl Fn(&[f64]) -> f64 + Sync + 'a {
    move |x| eval(&template.spec_at(x)).map(|r| r.bmse).unwrap_or(f64::INFINITY)
}

fn finish(template: &Template, prior_variance: f64, eval: &Evaluator, traces: Vec<StartTrace>) -> Result<OptResult> {
    let best = best_trace(&traces).ok_or_else(|| Error::Numeric("no optimizer starts".into()))?;
    let spec = template.spec_at(&traces[best].point);
    let report = eval(&spec)?;
    if !report.bmse.is_finite() {
        return Err(Error::Numeric(format!("non-finite BMSE for {}", template.label)));
    }
    Ok(OptResult {
        spec,
        bmse: report.bmse,
        ratio: report.ratio(prior_variance),
        estimator: report.estimator,
        evaluations: traces.iter().map(|t| t.evaluations).sum(),
        traces,
    })
}

/// Multistart search of the template's free times; `seeds` are extra starts
/// given as full protocol specs (embedded when they fit the template).
pub fn minimize_bmse(
    template: &Template,
    prior: &Prior,
    noise: &NoiseModel,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seeds: &[ProtocolSpec],
) -> Result<OptResult> {
    let eval = |spec: &ProtocolSpec| evaluate(spec, prior, noise);
    minimize_objective(template, space, config, seeds, prior.second_moment(), &eval)
}

/// As [`minimize_bmse`] with a caller-supplied evaluator.
pub fn minimize_objective(
    template: &Template,
    space: &SearchSpace,
    config: &OptimizerConfig,
    seeds: &[ProtocolSpec],
    prior_variance: f64,
    eval: &Evaluator,
) -> Result<OptResult> {
    if space.dim() != template.dim() {
        return Err(Error::DimensionMismatch {
            space: space.dim(),
            free: template.dim(),
        });
    }
    template.base.validate()?;
    let mut starts: Vec<Vec<f64>> = seeds.iter().filter_map(|s| template.embed(s)).collect();
    if let Some((sub, sub_space)) = nested(template, space)? {
        let inner = minimize_objective(&sub, &sub_space, config, seeds, prior_variance, eval)?;
        let mut x: Vec<f64> = sub.free.iter().map(|&i| inner.spec.times[i]).collect();
        x.push(0.0);
        starts.push(x);
    }
    let traces = multistart(objective(template, eval), space, config, &starts)?;
    finish(template, prior_variance, eval, traces)
}

/// The template with its last free time pinned at zero, when zero is inside
/// that coordinate's bounds. Its optimum seeds the full search, so a family
/// never does worse than the family it contains.
fn nested(template: &Template, space: &SearchSpace) -> Result<Option<(Template, SearchSpace)>> {
    let (Some(&last), Some(&(lo, hi))) = (template.free.last(), space.bounds().last()) else {
        return Ok(None);
    };
    if !(lo <= 0.0 && 0.0 <= hi) {
        return Ok(None);
    }
    let mut times = template.base.times.clone();
    times[last] = 0.0;
    let free = template.free[..template.free.len() - 1].to_vec();
    let sub = Template::new(&template.label, template.base.with_times(&times), free, template.signed)?;
    let sub_space = SearchSpace::new(space.bounds()[..space.dim() - 1].to_vec())?;
    Ok(Some((sub, sub_space)))
}

/// Local searches from the given seeds only; keeps `current` unless improved.
fn refine(
    template: &Template,
    prior: &Prior,
    noise: &NoiseModel,
    config: &OptimizerConfig,
    current: &OptResult,
    seeds: &[ProtocolSpec],
) -> Result<OptResult> {
    let space = template.default_space();
    let starts: Vec<Vec<f64>> = seeds.iter().filter_map(|s| template.embed(s)).collect();
    if starts.is_empty() || template.dim() == 0 {
        return Ok(current.clone());
    }
    let eval = |spec: &ProtocolSpec| evaluate(spec, prior, noise);
    let f = objective(template, &eval);
    let traces: Vec<StartTrace> = starts
        .par_iter()
        .map(|s| nelder_mead(&f, s, &space, config.max_evaluations, config.tolerance))
        .collect();
    let candidate = finish(template, prior.second_moment(), &eval, traces)?;
    if candidate.bmse < current.bmse {
        let mut out = candidate;
        out.evaluations += current.evaluations;
        let mut traces = current.traces.clone();
        traces.extend(out.traces);
        out.traces = traces;
        Ok(out)
    } else {
        Ok(current.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub delta_phi: f64,
    pub ratio: f64,
    pub bmse: f64,
    pub gain: f64,
    pub times: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierCurve {
    pub label: String,
    pub points: Vec<FrontierPoint>,
    /// Index of the interior minimum, if the minimum is not at a grid end.
    pub turning_point: Option<usize>,
}

impl FrontierCurve {
    fn from_points(label: &str, points: Vec<FrontierPoint>) -> Self {
        let idx = (0..points.len()).min_by(|&a, &b| points[a].ratio.total_cmp(&points[b].ratio).then(a.cmp(&b)));
        let turning_point = idx.filter(|&i| i > 0 && i + 1 < points.len());
        Self {
            label: label.to_string(),
            points,
            turning_point,
        }
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.ratio).collect()
    }

    /// Lowest ratio on the grid.
    pub fn best(&self) -> &FrontierPoint {
        self.points
            .iter()
            .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .expect("nonempty curve")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontierTable {
    pub delta_phi: Vec<f64>,
    pub curves: Vec<FrontierCurve>,
}

impl FrontierTable {
    pub fn curve(&self, label: &str) -> Option<&FrontierCurve> {
        self.curves.iter().find(|c| c.label == label)
    }
}

const REFINE_ROUNDS: usize = 4;

/// Optimized Delta phi/delta phi of every template on every prior width.
///
/// After independent multistart searches, each (template, width) cell is
/// re-searched from the optima of neighbouring widths and of every other
/// template that embeds into it, until nothing improves.
pub fn sweep_prior(
    templates: &[Template],
    delta_phi: &[f64],
    noise: &NoiseModel,
    config: &OptimizerConfig,
    nodes: usize,
) -> Result<FrontierTable> {
    if delta_phi.is_empty() {
        return Err(Error::EmptyGrid("prior widths"));
    }
    if templates.is_empty() {
        return Err(Error::EmptyGrid("templates"));
    }
    let priors: Vec<Prior> = delta_phi
        .iter()
        .map(|&d| gaussian_prior(d, nodes))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..templates.len())
        .flat_map(|t| (0..delta_phi.len()).map(move |j| (t, j)))
        .collect();

    let mut results: Vec<OptResult> = cells
        .par_iter()
        .map(|&(t, j)| {
            let tpl = &templates[t];
            minimize_bmse(tpl, &priors[j], noise, &tpl.default_space(), config, &[])
        })
        .collect::<Result<_>>()?;

    let index = |t: usize, j: usize| t * delta_phi.len() + j;
    for _ in 0..REFINE_ROUNDS {
        let next: Vec<OptResult> = cells
            .par_iter()
            .map(|&(t, j)| {
                let mut seeds: Vec<ProtocolSpec> = (0..templates.len())
                    .filter(|&u| u != t)
                    .map(|u| results[index(u, j)].spec.clone())
                    .collect();
                for k in [j.wrapping_sub(1), j + 1] {
                    if k < delta_phi.len() {
                        seeds.push(results[index(t, k)].spec.clone());
                    }
                }
                refine(&templates[t], &priors[j], noise, config, &results[index(t, j)], &seeds)
            })
            .collect::<Result<_>>()?;
        let improved = next.iter().zip(&results).any(|(a, b)| a.bmse < b.bmse);
        results = next;
        if !improved {
            break;
        }
    }

    let curves = templates
        .iter()
        .enumerate()
        .map(|(t, tpl)| {
            let points = delta_phi
                .iter()
                .enumerate()
                .map(|(j, &d)| {
                    let r = &results[index(t, j)];
                    FrontierPoint {
                        delta_phi: d,
                        ratio: r.ratio,
                        bmse: r.bmse,
                        gain: r.estimator.gain,
                        times: r.spec.times.clone(),
                        evaluations: r.evaluations,
                    }
                })
                .collect();
            FrontierCurve::from_points(&tpl.label, points)
        })
        .collect();
    Ok(FrontierTable {
        delta_phi: delta_phi.to_vec(),
        curves,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub order: usize,
    pub best: FrontierPoint,
    pub curve: FrontierCurve,
}

/// Best Delta phi/delta phi over the width grid for each sequential order.
pub fn sweep_order(
    particles: usize,
    chi: f64,
    orders: &[usize],
    delta_phi: &[f64],
    noise: &NoiseModel,
    config: &OptimizerConfig,
    nodes: usize,
) -> Result<Vec<OrderRow>> {
    if orders.is_empty() || orders.contains(&0) {
        return Err(Error::InvalidSpec("orders must be >= 1".into()));
    }
    let templates: Vec<Template> = orders
        .iter()
        .map(|&n| Template::sequential(particles, chi, n))
        .collect::<Result<_>>()?;
    let table = sweep_prior(&templates, delta_phi, noise, config, nodes)?;
    Ok(orders
        .iter()
        .zip(table.curves)
        .map(|(&order, curve)| OrderRow {
            order,
            best: curve.best().clone(),
            curve,
        })
        .collect())
}
