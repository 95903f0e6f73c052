//! Optimal-interferometer bound: alternating minimization of the Bayesian
//! quadratic cost over probe state and (Personick) measurement observable.
//!
//! The observable is a phi-independent projective measurement with
//! posterior-mean estimates, so the result bounds every protocol that ends in
//! such a measurement of a singly encoded probe.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::Prior;
use crate::spin::{coherent_state, DickeState, SpinSpace};

pub const DEFAULT_TOLERANCE: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 500;
/// Perturbed copies of the coherent start added to every run.
pub const RESTARTS: usize = 3;
const SUPPORT_THRESHOLD: f64 = 1e-12;

/// Prior averages of the encoded projector and of phi times it.
#[derive(Clone, Debug)]
pub struct PersonickPair {
    pub rho: DMatrix<Complex64>,
    pub rho1: DMatrix<Complex64>,
}

/// (E[exp(-i d phi)], E[phi exp(-i d phi)]) for d = m_k - m_l, indexed by k - l.
struct PhaseKernel {
    dim: usize,
    m0: Vec<Complex64>,
    m1: Vec<Complex64>,
    second: f64,
}

impl PhaseKernel {
    fn new(dim: usize, prior: &Prior) -> Self {
        let (m0, m1) = (0..dim).map(|d| prior.characteristic(d as f64)).unzip();
        Self {
            dim,
            m0,
            m1,
            second: prior.second_moment(),
        }
    }

    /// Symmetric priors make M0 real and M1 imaginary.
    fn is_real(&self) -> bool {
        let scale = self.second.sqrt().max(1e-300);
        self.m0.iter().all(|z| z.im.abs() <= 1e-13)
            && self.m1.iter().all(|z| z.re.abs() <= 1e-13 * scale)
    }

    /// Moments for the entry (k, l); m_k - m_l = l - k on the descending grid.
    fn at(&self, k: usize, l: usize) -> (Complex64, Complex64) {
        if l >= k {
            (self.m0[l - k], self.m1[l - k])
        } else {
            (self.m0[k - l].conj(), self.m1[k - l].conj())
        }
    }
}

fn hermitize(m: &mut DMatrix<Complex64>) {
    let adj = m.adjoint();
    *m = (&*m + adj).scale(0.5);
}

fn averaged_with(kernel: &PhaseKernel, probe: &DVector<Complex64>) -> PersonickPair {
    let d = kernel.dim;
    let mut rho = DMatrix::zeros(d, d);
    let mut rho1 = DMatrix::zeros(d, d);
    for l in 0..d {
        for k in 0..d {
            let outer = probe[k] * probe[l].conj();
            let (m0, m1) = kernel.at(k, l);
            rho[(k, l)] = outer * m0;
            rho1[(k, l)] = outer * m1;
        }
    }
    hermitize(&mut rho);
    hermitize(&mut rho1);
    PersonickPair { rho, rho1 }
}

pub fn averaged_states(probe: &DickeState, prior: &Prior) -> PersonickPair {
    let kernel = PhaseKernel::new(probe.space().dim(), prior);
    averaged_with(&kernel, probe.amplitudes())
}

/// Solves L rho + rho L = 2 rho1 in the eigenbasis of rho; components on
/// pairs with p_i + p_j below 1e-12 are set to zero.
pub fn personick_gain(pair: &PersonickPair) -> DMatrix<Complex64> {
    let eig = pair.rho.clone().symmetric_eigen();
    let u = &eig.eigenvectors;
    let r1 = u.adjoint() * &pair.rho1 * u;
    let p = &eig.eigenvalues;
    let d = p.len();
    let lp = DMatrix::from_fn(d, d, |i, j| {
        let s = p[i] + p[j];
        if s < SUPPORT_THRESHOLD {
            Complex64::new(0.0, 0.0)
        } else {
            r1[(i, j)] * (2.0 / s)
        }
    });
    let mut l = u * lp * u.adjoint();
    hermitize(&mut l);
    l
}

/// Bayesian cost of measuring `l` on the averaged states: E[phi^2] - tr(L rho1).
pub fn personick_bmse(l: &DMatrix<Complex64>, pair: &PersonickPair, prior: &Prior) -> f64 {
    prior.second_moment() - (l * &pair.rho1).trace().re
}

fn cost_matrix(kernel: &PhaseKernel, l: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let d = kernel.dim;
    let l2 = l * l;
    let mut a = DMatrix::from_fn(d, d, |k, j| {
        let (m0, m1) = kernel.at(k, j);
        l2[(k, j)] * m0.conj() - l[(k, j)] * m1.conj() * 2.0
    });
    for k in 0..d {
        a[(k, k)] += kernel.second;
    }
    hermitize(&mut a);
    a
}

/// Cost operator A = sum_j w_j E(phi_j)^dag (L - phi_j)^2 E(phi_j); its
/// expectation in a probe is that probe's BMSE under the measurement of L.
pub fn cost_operator(l: &DMatrix<Complex64>, prior: &Prior, space: &SpinSpace) -> Result<DMatrix<Complex64>> {
    if l.nrows() != space.dim() || l.ncols() != space.dim() {
        return Err(Error::InvalidSpec("observable does not match the spin space".into()));
    }
    Ok(cost_matrix(&PhaseKernel::new(space.dim(), prior), l))
}

fn lowest(a: DMatrix<Complex64>) -> (f64, DVector<Complex64>) {
    let eig = a.symmetric_eigen();
    let i = eig.eigenvalues.imin();
    (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
}

/// Probe minimizing the BMSE for a fixed measurement observable.
pub fn probe_step(l: &DMatrix<Complex64>, prior: &Prior, space: &SpinSpace) -> Result<DickeState> {
    let (_, v) = lowest(cost_operator(l, prior, space)?);
    DickeState::from_amplitudes(space, v)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OqiResult {
    pub bmse: f64,
    pub probe: Vec<(f64, f64)>,
    #[serde(skip)]
    pub observable: Option<DMatrix<Complex64>>,
    pub iterations: usize,
    pub converged: bool,
    /// BMSE after each half-step of the winning run.
    pub history: Vec<f64>,
    /// Final BMSE of every start, in start order.
    pub start_values: Vec<f64>,
}

impl OqiResult {
    /// Delta phi / delta phi.
    pub fn ratio(&self, prior: &Prior) -> f64 {
        (self.bmse / prior.second_moment()).sqrt()
    }

    pub fn probe_state(&self, space: &SpinSpace) -> Result<DickeState> {
        let amps = DVector::from_iterator(self.probe.len(), self.probe.iter().map(|&(re, im)| Complex64::new(re, im)));
        DickeState::from_amplitudes(space, amps)
    }
}

struct Run {
    bmse: f64,
    probe: DVector<Complex64>,
    observable: DMatrix<Complex64>,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn alternate(kernel: &PhaseKernel, start: DVector<Complex64>, tol: f64, max_iter: usize) -> Run {
    let mut probe = start;
    let mut history = Vec::new();
    let pair = averaged_with(kernel, &probe);
    let mut observable = personick_gain(&pair);
    let mut bmse = kernel.second - (&observable * &pair.rho1).trace().re;
    history.push(bmse);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let (value, candidate) = lowest(cost_matrix(kernel, &observable));
        if !(value <= bmse) {
            converged = true;
            break;
        }
        let pair = averaged_with(kernel, &candidate);
        let l = personick_gain(&pair);
        let next = (kernel.second - (&l * &pair.rho1).trace().re).min(value);
        history.push(value);
        history.push(next);
        let drop = bmse - next;
        probe = candidate;
        observable = l;
        bmse = next;
        if drop < tol {
            converged = true;
            break;
        }
    }
    Run {
        bmse,
        probe,
        observable,
        iterations,
        converged,
        history,
    }
}

/// Same iteration for a real probe and a symmetric prior. Then rho is real
/// symmetric, rho1 = i S and L = i K with S, K real antisymmetric, and the
/// cost operator -K^2 o M0 - 2 K o Im M1 + E[phi^2] is real symmetric.
fn alternate_real(kernel: &PhaseKernel, start: DVector<f64>, tol: f64, max_iter: usize) -> Run {
    let d = kernel.dim;
    let m0 = DMatrix::from_fn(d, d, |k, l| kernel.at(k, l).0.re);
    let m1 = DMatrix::from_fn(d, d, |k, l| kernel.at(k, l).1.im);
    let gain = |psi: &DVector<f64>| -> (DMatrix<f64>, f64) {
        let outer = psi * psi.transpose();
        let rho = outer.component_mul(&m0);
        let s = outer.component_mul(&m1);
        let eig = rho.symmetric_eigen();
        let u = &eig.eigenvectors;
        let sp = u.transpose() * &s * u;
        let p = &eig.eigenvalues;
        let kp = DMatrix::from_fn(d, d, |i, j| {
            let t = p[i] + p[j];
            if t < SUPPORT_THRESHOLD {
                0.0
            } else {
                2.0 * sp[(i, j)] / t
            }
        });
        let mut k = u * kp * u.transpose();
        k = (&k - k.transpose()) * 0.5;
        let value = kernel.second + (&k * &s).trace();
        (k, value)
    };
    let lowest_real = |k: &DMatrix<f64>| -> (f64, DVector<f64>) {
        let mut a = -(k * k).component_mul(&m0) - k.component_mul(&m1) * 2.0;
        for i in 0..d {
            a[(i, i)] += kernel.second;
        }
        a = (&a + a.transpose()) * 0.5;
        let eig = a.symmetric_eigen();
        let i = eig.eigenvalues.imin();
        (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned())
    };

    let mut probe = start;
    let (mut k, mut bmse) = gain(&probe);
    let mut history = vec![bmse];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let (value, candidate) = lowest_real(&k);
        if !(value <= bmse) {
            converged = true;
            break;
        }
        let (next_k, next) = gain(&candidate);
        let next = next.min(value);
        history.push(value);
        history.push(next);
        let drop = bmse - next;
        probe = candidate;
        k = next_k;
        bmse = next;
        if drop < tol {
            converged = true;
            break;
        }
    }
    let i = Complex64::new(0.0, 1.0);
    Run {
        bmse,
        probe: probe.map(|v| Complex64::new(v, 0.0)),
        observable: k.map(|v| i * v),
        iterations,
        converged,
        history,
    }
}

fn as_real(v: &DVector<Complex64>) -> Option<DVector<f64>> {
    // Global phase first: make the largest component real.
    let big = v.iter().max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))?;
    let phase = big.conj() / big.norm();
    let rotated = v.map(|z| z * phase);
    rotated
        .iter()
        .all(|z| z.im.abs() <= 1e-12)
        .then(|| rotated.map(|z| z.re))
}

/// Starts: +x coherent state, `RESTARTS` random perturbations of it, then `seeds`.
fn starts(space: &SpinSpace, seeds: &[DickeState]) -> Vec<DVector<Complex64>> {
    let css = coherent_state(space, std::f64::consts::FRAC_PI_2, 0.0);
    let mut out = vec![css.amplitudes().clone()];
    let mut rng = ChaCha8Rng::seed_from_u64(0x0051_a7e5);
    for _ in 0..RESTARTS {
        let noisy = css.amplitudes().map(|a| {
            a + Complex64::new(rng.random::<f64>() - 0.5, 0.0) * 0.2 / (space.dim() as f64).sqrt()
        });
        out.push(noisy.normalize());
    }
    out.extend(seeds.iter().map(|s| s.amplitudes().clone()));
    out
}

/// Lowest BMSE reachable by the alternating scheme from a set of starts.
pub fn oqi_limit(space: &SpinSpace, prior: &Prior, tol: f64, max_iter: usize, seeds: &[DickeState]) -> Result<OqiResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidSpec("tolerance must be positive".into()));
    }
    for s in seeds {
        space.check_same(s.space())?;
    }
    let kernel = PhaseKernel::new(space.dim(), prior);
    let runs: Vec<Run> = starts(space, seeds)
        .into_par_iter()
        .map(|s| match (kernel.is_real(), as_real(&s)) {
            (true, Some(r)) => alternate_real(&kernel, r, tol, max_iter),
            _ => alternate(&kernel, s, tol, max_iter),
        })
        .collect();
    let start_values: Vec<f64> = runs.iter().map(|r| r.bmse).collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| runs[a].bmse.total_cmp(&runs[b].bmse).then(a.cmp(&b)))
        .expect("at least one start");
    let run = runs.into_iter().nth(best).unwrap();
    if !run.bmse.is_finite() {
        return Err(Error::Numeric("OQI iteration produced a non-finite BMSE".into()));
    }
    Ok(OqiResult {
        bmse: run.bmse,
        probe: run.probe.iter().map(|z| (z.re, z.im)).collect(),
        observable: Some(run.observable),
        iterations: run.iterations,
        converged: run.converged,
        history: run.history,
        start_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{bmse, gaussian_prior};
    use crate::optimize::{minimize_bmse, OptimizerConfig, Template};
    use crate::protocol::{NoiseModel, ProtocolSpec, TwistEngine};
    use nalgebra::DMatrix;

    fn point_prior() -> Prior {
        Prior::tabulated(vec![0.0], vec![1.0]).unwrap()
    }

    #[test]
    fn point_prior_gives_pure_state_and_zero_bound() {
        let space = SpinSpace::new(6).unwrap();
        let psi = coherent_state(&space, 1.1, 0.4);
        let pair = averaged_states(&psi, &point_prior());
        let proj = psi.amplitudes() * psi.amplitudes().adjoint();
        assert!((&pair.rho - proj).camax() < 1e-15);
        assert!(pair.rho1.camax() < 1e-15);
        let r = oqi_limit(&space, &point_prior(), 1e-10, 50, &[]).unwrap();
        assert!(r.bmse.abs() < 1e-14);
    }

    #[test]
    fn averaged_state_traces() {
        let space = SpinSpace::new(20).unwrap();
        let prior = gaussian_prior(0.5, 80).unwrap();
        let css = coherent_state(&space, std::f64::consts::FRAC_PI_2, 0.0);
        let pair = averaged_states(&css, &prior);
        assert!((pair.rho.trace().re - 1.0).abs() < 1e-10);
        assert!(pair.rho1.trace().norm() < 1e-10);
        let min = pair.rho.clone().symmetric_eigen().eigenvalues.min();
        assert!(min >= -1e-10);
    }

    #[test]
    fn commuting_pair_divides() {
        let p = [0.5, 0.3, 0.2, 0.0];
        let q = [0.1, -0.2, 0.05, 0.0];
        let diag = |v: &[f64]| DMatrix::from_fn(4, 4, |i, j| Complex64::new(if i == j { v[i] } else { 0.0 }, 0.0));
        let pair = PersonickPair {
            rho: diag(&p),
            rho1: diag(&q),
        };
        let l = personick_gain(&pair);
        for i in 0..3 {
            assert!((l[(i, i)].re - q[i] / p[i]).abs() < 1e-12);
        }
        assert!(l[(3, 3)].norm() < 1e-12);
        let zero = PersonickPair {
            rho: diag(&p),
            rho1: DMatrix::zeros(4, 4),
        };
        assert!(personick_gain(&zero).camax() < 1e-15);
    }

    #[test]
    fn random_pair_satisfies_lyapunov_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut c = || Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let g = DMatrix::from_fn(4, 4, |_, _| c());
        let mut rho = &g * g.adjoint();
        let tr = rho.trace();
        rho /= tr;
        let mut rho1 = DMatrix::from_fn(4, 4, |_, _| c());
        hermitize(&mut rho1);
        let pair = PersonickPair { rho: rho.clone(), rho1: rho1.clone() };
        let l = personick_gain(&pair);
        let residual = (&l * &rho + &rho * &l - rho1 * Complex64::new(2.0, 0.0)).camax();
        assert!(residual <= 1e-8, "{residual}");
    }

    #[test]
    fn zero_observable_costs_prior_variance() {
        let space = SpinSpace::new(8).unwrap();
        let prior = gaussian_prior(0.4, 40).unwrap();
        let a = cost_operator(&DMatrix::zeros(9, 9), &prior, &space).unwrap();
        let eig = a.symmetric_eigen().eigenvalues;
        assert!(eig.iter().all(|v| (v - 0.16).abs() < 1e-12));
    }

    #[test]
    fn cost_operator_is_positive() {
        let space = SpinSpace::new(10).unwrap();
        let prior = gaussian_prior(0.7, 40).unwrap();
        let css = coherent_state(&space, std::f64::consts::FRAC_PI_2, 0.0);
        let l = personick_gain(&averaged_states(&css, &prior));
        let eig = cost_operator(&l, &prior, &space).unwrap().symmetric_eigen().eigenvalues;
        assert!(eig.min() >= -1e-12);
    }

    #[test]
    fn personick_identity() {
        let space = SpinSpace::new(12).unwrap();
        let prior = gaussian_prior(0.6, 80).unwrap();
        let psi = TwistEngine::shared(12, 1.0).unwrap().probe(0.08);
        let pair = averaged_states(&psi, &prior);
        let l = personick_gain(&pair);
        let formula = personick_bmse(&l, &pair, &prior);
        let a = cost_operator(&l, &prior, &space).unwrap();
        let v = psi.amplitudes();
        let direct = (v.adjoint() * a * v)[(0, 0)].re;
        assert!((formula - direct).abs() < 1e-9, "{formula} vs {direct}");
    }

    #[test]
    fn iterates_never_increase() {
        let space = SpinSpace::new(30).unwrap();
        for dp in [0.2, 0.5, 0.9] {
            let r = oqi_limit(&space, &gaussian_prior(dp, 80).unwrap(), 1e-10, 200, &[]).unwrap();
            assert!(r.history.windows(2).all(|w| w[1] <= w[0]), "dp={dp}");
            assert!(r.bmse <= dp * dp);
        }
    }

    /// Exhaustive search over qubit probes on the Bloch sphere and projective
    /// measurement axes, with the posterior-mean estimate for each outcome.
    fn qubit_grid_oracle(dp: f64) -> f64 {
        let v = dp * dp;
        let g = (-0.5 * v).exp();
        let (ec, es, epc, eps) = (g, 0.0, 0.0, v * g); // E cos, E sin, E phi cos, E phi sin
        let n = 48;
        let mut best = f64::INFINITY;
        let pi = std::f64::consts::PI;
        for a in 0..=n {
            let th = pi * a as f64 / n as f64;
            for b in 0..2 * n {
                let ph = pi * b as f64 / n as f64;
                for c in 0..=n {
                    let tm = pi * c as f64 / n as f64;
                    for e in 0..2 * n {
                        let pm = pi * e as f64 / n as f64;
                        let (st, ct) = th.sin_cos();
                        let (sm, cm) = tm.sin_cos();
                        // n . r(phi) with r rotated by phi about z.
                        let ax = sm * pm.cos();
                        let ay = sm * pm.sin();
                        let (cph, sph) = (ph.cos(), ph.sin());
                        let mean_dot = st * (ax * (cph * ec - sph * es) + ay * (sph * ec + cph * es)) + cm * ct;
                        let phi_dot = st * (ax * (cph * epc - sph * eps) + ay * (sph * epc + cph * eps));
                        let mut cost = v;
                        for s in [1.0, -1.0] {
                            let p = 0.5 * (1.0 + s * mean_dot);
                            let num = 0.5 * s * phi_dot;
                            if p > 1e-15 {
                                cost -= num * num / p;
                            }
                        }
                        best = best.min(cost);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn qubit_bound_matches_exhaustive_grid() {
        let space = SpinSpace::new(1).unwrap();
        let prior = gaussian_prior(0.3, 80).unwrap();
        let r = oqi_limit(&space, &prior, 1e-12, 500, &[]).unwrap();
        let oracle = qubit_grid_oracle(0.3);
        assert!((r.bmse - oracle).abs() < 1e-3, "{} vs {oracle}", r.bmse);
    }

    #[test]
    fn bound_improves_with_particle_number() {
        let prior = gaussian_prior(0.5, 80).unwrap();
        let values: Vec<f64> = [10, 30, 100]
            .iter()
            .map(|&n| oqi_limit(&SpinSpace::new(n).unwrap(), &prior, 1e-10, 500, &[]).unwrap().bmse)
            .collect();
        assert!(values[0] > values[1] && values[1] > values[2], "{values:?}");
    }

    #[test]
    fn real_iteration_matches_complex_iteration() {
        let space = SpinSpace::new(20).unwrap();
        let prior = gaussian_prior(0.5, 80).unwrap();
        let kernel = PhaseKernel::new(space.dim(), &prior);
        assert!(kernel.is_real());
        let start = TwistEngine::shared(20, 1.0).unwrap().probe(0.03);
        let real = as_real(start.amplitudes()).unwrap();
        let a = alternate(&kernel, start.amplitudes().clone(), 1e-12, 30);
        let b = alternate_real(&kernel, real, 1e-12, 30);
        assert!((a.bmse - b.bmse).abs() < 1e-10, "{} vs {}", a.bmse, b.bmse);
        assert!((a.history[1] - b.history[1]).abs() < 1e-12);
    }

    #[test]
    fn lower_bounds_protocols() {
        let n = 40;
        let space = SpinSpace::new(n).unwrap();
        let noise = NoiseModel::noiseless();
        let cfg = OptimizerConfig {
            starts: 4,
            max_evaluations: 200,
            ..Default::default()
        };
        for dp in [0.3, 0.7] {
            let prior = gaussian_prior(dp, 80).unwrap();
            let tpl = Template::deamplified(n, 1.0);
            let qd = minimize_bmse(&tpl, &prior, &noise, &tpl.default_space(), &cfg, &[]).unwrap();
            let seed = TwistEngine::shared(n, 1.0).unwrap().probe(qd.spec.times[0]);
            let bound = oqi_limit(&space, &prior, 1e-10, 500, &[seed]).unwrap().bmse;
            for spec in [
                ProtocolSpec::classical(n),
                ProtocolSpec::squeezed(n, 0.02),
                ProtocolSpec::deamplified(n, 0.03, 0.01),
                qd.spec.clone(),
            ] {
                let b = bmse(&spec, &prior, &noise).unwrap();
                assert!(b >= bound - 1e-8, "dp={dp} {:?}: {b} < {bound}", spec.times);
            }
        }
    }
}
