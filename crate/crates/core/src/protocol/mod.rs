//! Interferometer sequences: probe twisting, (interleaved) phase encoding,
//! readout twisting, and S_y measurement statistics.

mod engine;
mod spec;

pub use engine::{PreparedSequence, TwistEngine};
pub use spec::{NoiseModel, ProtocolKind, ProtocolSpec};

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::estimation::detection_noise_convolve;
use crate::spin::DickeState;

/// Fine-grid step used to locate the monotone interval of a response curve.
pub const DYNAMIC_RANGE_STEP: f64 = PI / 2000.0;

/// Final state of the sequence at total phase `phi`, in the S_z basis.
pub fn run_sequence(spec: &ProtocolSpec, phi: f64) -> Result<DickeState> {
    let engine = TwistEngine::for_spec(spec)?;
    Ok(engine.prepare(spec).final_state(phi))
}

/// p(m | phi) in the S_y basis, blurred by detection noise when present.
pub fn outcome_distribution(spec: &ProtocolSpec, phi: f64, noise: &NoiseModel) -> Result<Vec<f64>> {
    let engine = TwistEngine::for_spec(spec)?;
    let p = engine.prepare(spec).sy_probabilities(phi);
    Ok(detection_noise_convolve(&p, noise.sigma_det))
}

/// <S_y>/S of the final state at each phase.
pub fn response_curve(spec: &ProtocolSpec, phi_grid: &[f64]) -> Result<Vec<f64>> {
    if phi_grid.is_empty() {
        return Err(Error::EmptyGrid("response phases"));
    }
    let engine = TwistEngine::for_spec(spec)?;
    let prepared = engine.prepare(spec);
    Ok(phi_grid
        .iter()
        .map(|&phi| normalized_sy(engine.space(), &prepared.sy_probabilities(phi)))
        .collect())
}

fn normalized_sy(space: &crate::spin::SpinSpace, p: &[f64]) -> f64 {
    let mean: f64 = p.iter().enumerate().map(|(k, pk)| space.m(k) * pk).sum();
    mean / space.spin()
}

/// Monotone interval of the response around phi = 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicRange {
    pub lower: f64,
    pub upper: f64,
}

impl DynamicRange {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, lo: f64, hi: f64) -> bool {
        self.lower <= lo && hi <= self.upper
    }
}

/// Widest interval around 0 on which the response curve is strictly monotone.
///
/// Scans outward on the fixed grid k * pi/2000 until the sign of the forward
/// difference changes. The scan stops at pi / max(slot fraction), the half
/// period of the composite response for even N.
pub fn dynamic_range(spec: &ProtocolSpec) -> Result<DynamicRange> {
    let engine = TwistEngine::for_spec(spec)?;
    let prepared = engine.prepare(spec);
    let f_max = spec.slot_fractions.iter().cloned().fold(0.0, f64::max);
    let limit = PI / f_max;
    let steps = (limit / DYNAMIC_RANGE_STEP).round() as usize;
    let response = |phi: f64| normalized_sy(engine.space(), &prepared.sy_probabilities(phi));
    let r0 = response(0.0);

    let scan = |dir: f64| -> f64 {
        let mut prev = r0;
        let mut sign = 0.0;
        for k in 1..=steps {
            let cur = response(dir * k as f64 * DYNAMIC_RANGE_STEP);
            let s = (cur - prev).signum() * if cur == prev { 0.0 } else { 1.0 };
            if k == 1 {
                sign = s;
            }
            if s == 0.0 || s != sign {
                return (k - 1) as f64 * DYNAMIC_RANGE_STEP;
            }
            prev = cur;
        }
        steps as f64 * DYNAMIC_RANGE_STEP
    };
    let upper = scan(1.0);
    let lower = -scan(-1.0);
    Ok(DynamicRange { lower, upper })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{coherent_state, tact_hamiltonian, SpinSpace};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn zero_times_is_classical_ramsey() {
        let spec = ProtocolSpec::classical(12);
        let space = SpinSpace::new(12).unwrap();
        let direct = coherent_state(&space, FRAC_PI_2, 0.0).encode_phase(0.8);
        let state = run_sequence(&spec, 0.8).unwrap();
        assert!(state.fidelity(&direct) > 1.0 - 1e-12);
    }

    #[test]
    fn zero_phase_collapses_segments() {
        let spec = ProtocolSpec::deamplified(20, 0.013, 0.021);
        let space = SpinSpace::new(20).unwrap();
        // Protocol segments run exp(+i t H).
        let h = tact_hamiltonian(&space, 1.0);
        let single = coherent_state(&space, FRAC_PI_2, 0.0)
            .evolve(&h, -0.034)
            .unwrap();
        assert!(run_sequence(&spec, 0.0).unwrap().fidelity(&single) > 1.0 - 1e-12);
    }

    #[test]
    fn positive_times_squeeze_readout_quadrature() {
        let spec = ProtocolSpec::squeezed(100, 0.01);
        let css = outcome_distribution(&ProtocolSpec::classical(100), 0.0, &NoiseModel::noiseless())
            .unwrap();
        let sss = outcome_distribution(&spec, 0.0, &NoiseModel::noiseless()).unwrap();
        let var = |p: &[f64]| -> f64 {
            p.iter()
                .enumerate()
                .map(|(k, pk)| (50.0 - k as f64).powi(2) * pk)
                .sum()
        };
        assert!(var(&sss) < 0.2 * var(&css));
    }

    #[test]
    fn classical_distribution_is_binomial() {
        let n = 30;
        let space = SpinSpace::new(n).unwrap();
        let p = outcome_distribution(&ProtocolSpec::classical(n), 0.0, &NoiseModel::noiseless())
            .unwrap();
        for (k, pk) in p.iter().enumerate() {
            let b = (space.ln_binomial(k) - n as f64 * 2f64.ln()).exp();
            assert!((pk - b).abs() < 1e-12);
        }
    }

    #[test]
    fn classical_response_is_sine() {
        let grid: Vec<f64> = (-20..=20).map(|i| i as f64 * PI / 20.0).collect();
        let r = response_curve(&ProtocolSpec::classical(100), &grid).unwrap();
        for (phi, v) in grid.iter().zip(r) {
            assert!((v - phi.sin()).abs() < 1e-9);
        }
        assert!(response_curve(&ProtocolSpec::classical(4), &[]).is_err());
    }

    #[test]
    fn classical_dynamic_range() {
        let r = dynamic_range(&ProtocolSpec::classical(100)).unwrap();
        assert!((r.upper - FRAC_PI_2).abs() <= DYNAMIC_RANGE_STEP);
        assert!((r.lower + FRAC_PI_2).abs() <= DYNAMIC_RANGE_STEP);
    }

    #[test]
    fn deamplification_widens_and_amplification_narrows() {
        let qd = dynamic_range(&ProtocolSpec::deamplified(100, 0.005, 0.025)).unwrap();
        assert!(qd.contains(-0.9 * PI, 0.9 * PI), "{qd:?}");
        let qa = dynamic_range(&ProtocolSpec::amplified(100, 0.0135, -0.0135)).unwrap();
        assert!(qa.upper < FRAC_PI_2 && qa.lower > -FRAC_PI_2, "{qa:?}");
    }

    #[test]
    fn amplification_steepens_slope() {
        let h = 1e-4;
        let slope = |spec: &ProtocolSpec| {
            let r = response_curve(spec, &[-h, h]).unwrap();
            (r[1] - r[0]) / (2.0 * h)
        };
        let css = slope(&ProtocolSpec::classical(100));
        let qa = slope(&ProtocolSpec::amplified(100, 0.0135, -0.0135));
        assert!(qa > css, "{qa} vs {css}");
    }
}
