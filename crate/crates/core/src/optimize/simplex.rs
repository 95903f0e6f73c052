use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Box constraints on the free times.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    bounds: Vec<(f64, f64)>,
}

impl SearchSpace {
    pub fn new(bounds: Vec<(f64, f64)>) -> Result<Self> {
        for &(lo, hi) in &bounds {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidSpec(format!("empty search interval [{lo}, {hi}]")));
            }
        }
        Ok(Self { bounds })
    }

    /// `dim` copies of [lo, hi].
    pub fn uniform(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![(lo, hi); dim])
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, &(lo, hi)) in x.iter_mut().zip(&self.bounds) {
            *v = v.clamp(lo, hi);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.bounds).all(|(v, &(lo, hi))| lo <= *v && *v <= hi)
    }

    /// Latin-hypercube sample of `count` points.
    pub fn latin_hypercube(&self, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
        let mut points = vec![vec![0.0; self.dim()]; count];
        for (d, &(lo, hi)) in self.bounds.iter().enumerate() {
            let mut strata: Vec<usize> = (0..count).collect();
            strata.shuffle(rng);
            for (p, s) in points.iter_mut().zip(strata) {
                let u: f64 = rng.random();
                p[d] = lo + (hi - lo) * (s as f64 + u) / count as f64;
            }
        }
        points
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_evaluations: usize,
    /// Relative spread of simplex values at convergence.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            starts: 8,
            max_evaluations: 600,
            tolerance: 1e-10,
            seed: 2024,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 || self.max_evaluations == 0 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidSpec(
                "optimizer needs starts, evaluations and tolerance > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one local search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartTrace {
    pub start: Vec<f64>,
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Bounded Nelder-Mead: trial points are clamped into the box.
pub fn nelder_mead<F>(f: F, start: &[f64], space: &SearchSpace, max_evaluations: usize, tolerance: f64) -> StartTrace
where
    F: Fn(&[f64]) -> f64,
{
    let dim = space.dim();
    let mut evaluations = 0;
    let eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut x0 = start.to_vec();
    space.clamp(&mut x0);
    if dim == 0 {
        let value = eval(&x0, &mut evaluations);
        return StartTrace {
            start: x0.clone(),
            point: x0,
            value,
            evaluations,
            converged: true,
        };
    }

    let widths: Vec<f64> = space.bounds().iter().map(|(lo, hi)| hi - lo).collect();
    let mut simplex = vec![x0.clone()];
    for d in 0..dim {
        let mut p = x0.clone();
        let (lo, hi) = space.bounds()[d];
        let step = 0.1 * widths[d];
        p[d] = if p[d] + step <= hi { p[d] + step } else { (p[d] - step).max(lo) };
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| eval(p, &mut evaluations)).collect();

    let mut converged = false;
    while evaluations < max_evaluations {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let best = values[0];
        let worst = values[dim];
        let spread = simplex[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&simplex[0]).zip(&widths).map(|((a, b), w)| (a - b).abs() / w))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= tolerance * best.abs().max(1e-300) && spread <= 1e-6 {
            converged = true;
            break;
        }
        if spread <= 1e-12 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|d| simplex[..dim].iter().map(|p| p[d]).sum::<f64>() / dim as f64)
            .collect();
        let toward = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            space.clamp(&mut p);
            p
        };

        let reflected = toward(1.0);
        let fr = eval(&reflected, &mut evaluations);
        if fr < values[0] {
            let expanded = toward(2.0);
            let fe = eval(&expanded, &mut evaluations);
            if fe < fr {
                simplex[dim] = expanded;
                values[dim] = fe;
            } else {
                simplex[dim] = reflected;
                values[dim] = fr;
            }
            continue;
        }
        if fr < values[dim - 1] {
            simplex[dim] = reflected;
            values[dim] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[dim] {
            let c = toward(0.5);
            let v = eval(&c, &mut evaluations);
            (c, v)
        } else {
            let c = toward(-0.5);
            let v = eval(&c, &mut evaluations);
            (c, v)
        };
        if fc < values[dim].min(fr) {
            simplex[dim] = contracted;
            values[dim] = fc;
            continue;
        }
        let anchor = simplex[0].clone();
        for i in 1..=dim {
            for d in 0..dim {
                simplex[i][d] = anchor[d] + 0.5 * (simplex[i][d] - anchor[d]);
            }
            values[i] = eval(&simplex[i], &mut evaluations);
        }
    }

    let best = (0..=dim)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .unwrap();
    StartTrace {
        start: x0,
        point: simplex[best].clone(),
        value: values[best],
        evaluations,
        converged,
    }
}

/// Local searches from Latin-hypercube starts plus any `seeds`, run in
/// parallel. Traces are ordered seeds first, then sampled starts.
pub fn multistart<F>(f: F, space: &SearchSpace, config: &OptimizerConfig, seeds: &[Vec<f64>]) -> Result<Vec<StartTrace>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    let mut starts: Vec<Vec<f64>> = seeds
        .iter()
        .filter(|s| s.len() == space.dim())
        .cloned()
        .collect();
    if space.dim() == 0 {
        starts = vec![Vec::new()];
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        starts.extend(space.latin_hypercube(config.starts, &mut rng));
    }
    Ok(starts
        .par_iter()
        .map(|s| nelder_mead(&f, s, space, config.max_evaluations, config.tolerance))
        .collect())
}

/// Index of the lowest value; ties go to the earliest trace.
pub fn best_trace(traces: &[StartTrace]) -> Option<usize> {
    (0..traces.len()).min_by(|&a, &b| traces[a].value.total_cmp(&traces[b].value).then(a.cmp(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(x: &[f64]) -> f64 {
        let (a, b) = (x[0] - 0.3, x[1] + 0.2);
        3.0 * a * a + a * b + 2.0 * b * b + 1.0
    }

    #[test]
    fn recovers_quadratic_minimizer() {
        let space = SearchSpace::uniform(2, -1.0, 1.0).unwrap();
        let cfg = OptimizerConfig {
            tolerance: 1e-14,
            max_evaluations: 2000,
            ..Default::default()
        };
        let traces = multistart(quadratic, &space, &cfg, &[]).unwrap();
        let best = &traces[best_trace(&traces).unwrap()];
        assert!((best.point[0] - 0.3).abs() < 1e-5 && (best.point[1] + 0.2).abs() < 1e-5, "{:?}", best.point);
        assert!(traces.iter().all(|t| best.value <= t.value));
    }

    #[test]
    fn respects_bounds() {
        let space = SearchSpace::uniform(2, 0.5, 1.0).unwrap();
        let t = nelder_mead(quadratic, &[0.9, 0.9], &space, 500, 1e-12);
        assert!(space.contains(&t.point));
        assert!((t.point[0] - 0.5).abs() < 1e-6 && (t.point[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn zero_dimensional_search_evaluates_once() {
        let space = SearchSpace::new(vec![]).unwrap();
        let traces = multistart(|_| 4.0, &space, &OptimizerConfig::default(), &[]).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].evaluations, 1);
        assert_eq!(traces[0].value, 4.0);
    }

    #[test]
    fn deterministic_under_seed() {
        let space = SearchSpace::uniform(3, -1.0, 1.0).unwrap();
        let f = |x: &[f64]| (x[0] - 0.1).powi(2) + (x[1] * x[2] - 0.2).powi(2) + x[2].powi(4);
        let cfg = OptimizerConfig::default();
        let a = multistart(f, &space, &cfg, &[]).unwrap();
        let b = multistart(f, &space, &cfg, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn latin_hypercube_hits_every_stratum() {
        let space = SearchSpace::uniform(2, 0.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = space.latin_hypercube(10, &mut rng);
        for d in 0..2 {
            let mut strata: Vec<usize> = pts.iter().map(|p| (p[d] * 10.0) as usize).collect();
            strata.sort();
            assert_eq!(strata, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rejects_bad_config_and_bounds() {
        assert!(SearchSpace::new(vec![(1.0, 1.0)]).is_err());
        let cfg = OptimizerConfig {
            starts: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
