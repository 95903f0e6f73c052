use nalgebra::DVector;
use num_complex::Complex64;

use super::{directional_operator, Axis, HermitianOperator, SpinSpace};
use crate::error::Result;

/// Pure state of the collective spin, amplitudes over m = S, ..., -S.
#[derive(Clone, Debug)]
pub struct DickeState {
    space: SpinSpace,
    amplitudes: DVector<Complex64>,
}

/// Coherent spin state pointing along (sin th cos ph, sin th sin ph, cos th).
pub fn coherent_state(space: &SpinSpace, theta: f64, phi: f64) -> DickeState {
    let n = space.particles();
    let (sin_h, cos_h) = (theta / 2.0).sin_cos();
    let amplitudes = DVector::from_iterator(
        space.dim(),
        (0..space.dim()).map(|k| {
            // k = S - m, so cos carries power S + m = N - k and sin carries k.
            let magnitude = real_power_product(space.ln_binomial(k) / 2.0, cos_h, n - k, sin_h, k);
            Complex64::from_polar(1.0, k as f64 * phi) * magnitude
        }),
    );
    DickeState {
        space: space.clone(),
        amplitudes,
    }
}

/// sqrt-binomial prefactor times a^p b^q, evaluated in log space with signs tracked.
pub(crate) fn real_power_product(ln_prefactor: f64, a: f64, p: usize, b: f64, q: usize) -> f64 {
    if (a == 0.0 && p > 0) || (b == 0.0 && q > 0) {
        return 0.0;
    }
    let mut ln = ln_prefactor;
    if p > 0 {
        ln += p as f64 * a.abs().ln();
    }
    if q > 0 {
        ln += q as f64 * b.abs().ln();
    }
    let negative = (a < 0.0 && p % 2 == 1) ^ (b < 0.0 && q % 2 == 1);
    let v = ln.exp();
    if negative {
        -v
    } else {
        v
    }
}

impl DickeState {
    /// Builds a state from raw amplitudes, normalizing them.
    pub fn from_amplitudes(space: &SpinSpace, amplitudes: DVector<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(crate::Error::Numeric(format!(
                "{} amplitudes for a {}-dimensional space",
                amplitudes.len(),
                space.dim()
            )));
        }
        let norm = amplitudes.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(crate::Error::Numeric("state has zero or non-finite norm".into()));
        }
        Ok(Self {
            space: space.clone(),
            amplitudes: amplitudes.unscale(norm),
        })
    }

    /// Basis state |m = S - k>.
    pub fn basis(space: &SpinSpace, k: usize) -> Self {
        let mut amplitudes = DVector::zeros(space.dim());
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Self {
            space: space.clone(),
            amplitudes,
        }
    }

    pub(crate) fn from_parts(space: SpinSpace, amplitudes: DVector<Complex64>) -> Self {
        Self { space, amplitudes }
    }

    pub fn space(&self) -> &SpinSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// |<self|other>|^2
    pub fn fidelity(&self, other: &DickeState) -> f64 {
        self.amplitudes.dotc(&other.amplitudes).norm_sqr()
    }

    /// exp(-i H t)|psi> through the cached eigensystem of `h`. Negative t is allowed.
    pub fn evolve(&self, h: &HermitianOperator, t: f64) -> Result<DickeState> {
        self.space.check_same(h.space())?;
        if t == 0.0 {
            return Ok(self.clone());
        }
        Ok(Self {
            space: self.space.clone(),
            amplitudes: h.spectral().propagate(&self.amplitudes, t),
        })
    }

    /// Phase imprint exp(-i phi S_z). For the +x coherent state this gives <S_y> = S sin phi.
    pub fn encode_phase(&self, phi: f64) -> DickeState {
        let mut out = self.clone();
        encode_in_place(&self.space, &mut out.amplitudes, phi);
        out
    }

    /// Rigid rotation exp(-i angle n.S) about the unit vector `axis`.
    pub fn rotate(&self, axis: [f64; 3], angle: f64) -> DickeState {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let n = [axis[0] / norm, axis[1] / norm, axis[2] / norm];
        let generator = directional_operator(&self.space, n);
        self.evolve(&generator, angle).expect("generator shares the state's space")
    }

    /// Outcome probabilities of a projective S_y measurement, indexed like the m grid.
    pub fn sy_distribution(&self) -> Vec<f64> {
        self.space
            .sy_basis()
            .ad_mul(&self.amplitudes)
            .iter()
            .map(|z| z.norm_sqr())
            .collect()
    }

    pub fn expectation(&self, op: &HermitianOperator) -> Result<f64> {
        self.space.check_same(op.space())?;
        Ok(self.amplitudes.dotc(&(op.matrix() * &self.amplitudes)).re)
    }

    pub fn variance(&self, op: &HermitianOperator) -> Result<f64> {
        self.space.check_same(op.space())?;
        let applied = op.matrix() * &self.amplitudes;
        let mean = self.amplitudes.dotc(&applied).re;
        Ok(applied.norm_squared() - mean * mean)
    }

    /// S_a |psi> using the tridiagonal ladder structure.
    pub fn apply_spin(&self, axis: Axis) -> DVector<Complex64> {
        let dim = self.space.dim();
        let a = &self.amplitudes;
        let mut out = DVector::zeros(dim);
        match axis {
            Axis::Z => {
                for k in 0..dim {
                    out[k] = a[k] * self.space.m(k);
                }
            }
            Axis::X | Axis::Y => {
                // S+ moves index k -> k-1 with coefficient raising_coefficient(k).
                let (up, down) = match axis {
                    Axis::X => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
                    _ => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
                };
                for k in 1..dim {
                    let c = self.space.raising_coefficient(k);
                    out[k - 1] += up * c * a[k];
                    out[k] += down * c * a[k - 1];
                }
            }
        }
        out
    }

    /// Mean spin vector (<S_x>, <S_y>, <S_z>).
    pub fn mean_spin(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, axis) in Axis::ALL.iter().enumerate() {
            out[i] = self.amplitudes.dotc(&self.apply_spin(*axis)).re;
        }
        out
    }

    /// Symmetrized second moments Re<S_a S_b>.
    pub fn second_moments(&self) -> [[f64; 3]; 3] {
        let applied: Vec<DVector<Complex64>> =
            Axis::ALL.iter().map(|&a| self.apply_spin(a)).collect();
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = applied[i].dotc(&applied[j]).re;
            }
        }
        out
    }
}

pub(crate) fn encode_in_place(space: &SpinSpace, amplitudes: &mut DVector<Complex64>, phi: f64) {
    if phi == 0.0 {
        return;
    }
    for (k, c) in amplitudes.iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, -phi * space.m(k));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{collective_operator, tact_hamiltonian};
    use nalgebra::DMatrix;
    use std::f64::consts::{FRAC_PI_2, PI};

    /// exp(-iHt) by scaling and squaring of a truncated Taylor series.
    fn series_exponential(h: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
        let dim = h.nrows();
        let a = h * Complex64::new(0.0, -t);
        let norm: f64 = a.iter().map(|z| z.norm()).sum::<f64>().max(1e-300);
        let squarings = (norm.log2().ceil().max(0.0) as u32) + 4;
        let scaled = &a * Complex64::new(0.5f64.powi(squarings as i32), 0.0);
        let mut term = DMatrix::<Complex64>::identity(dim, dim);
        let mut sum = term.clone();
        for k in 1..40 {
            term = &term * &scaled * Complex64::new(1.0 / k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..squarings {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn spectral_evolution_matches_series_oracle() {
        for n in [1, 2, 3, 5, 8, 10] {
            let space = SpinSpace::new(n).unwrap();
            let h = tact_hamiltonian(&space, 1.0);
            let psi = coherent_state(&space, 1.1, 0.4);
            for t in [-0.1, -0.037, 0.02, 0.1] {
                let spectral = psi.evolve(&h, t).unwrap();
                let oracle = series_exponential(h.matrix(), t) * psi.amplitudes();
                let oracle = DickeState::from_parts(space.clone(), oracle);
                assert!(spectral.fidelity(&oracle) >= 1.0 - 1e-10, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn evolution_zero_time_is_identity() {
        let space = SpinSpace::new(20).unwrap();
        let h = tact_hamiltonian(&space, 1.0);
        let psi = coherent_state(&space, 0.7, 2.0);
        let out = psi.evolve(&h, 0.0).unwrap();
        assert!((out.amplitudes() - psi.amplitudes()).camax() <= 1e-14);
    }

    #[test]
    fn evolution_composes() {
        let space = SpinSpace::new(30).unwrap();
        let h = tact_hamiltonian(&space, 1.0);
        let psi = coherent_state(&space, FRAC_PI_2, 0.0);
        let two_step = psi.evolve(&h, 0.013).unwrap().evolve(&h, -0.031).unwrap();
        let one_step = psi.evolve(&h, 0.013 - 0.031).unwrap();
        assert!(two_step.fidelity(&one_step) >= 1.0 - 1e-10);
        assert!((two_step.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn evolve_rejects_foreign_operator() {
        let a = SpinSpace::new(4).unwrap();
        let b = SpinSpace::new(5).unwrap();
        let psi = coherent_state(&a, 1.0, 0.0);
        assert!(psi.evolve(&tact_hamiltonian(&b, 1.0), 0.1).is_err());
    }

    #[test]
    fn coherent_state_examples() {
        let space = SpinSpace::new(2).unwrap();
        let up = coherent_state(&space, 0.0, 0.3);
        assert!((up.amplitudes()[0].norm() - 1.0).abs() < 1e-15);

        let x = coherent_state(&space, FRAC_PI_2, 0.0);
        let expected = [0.5, std::f64::consts::FRAC_1_SQRT_2, 0.5];
        for (a, e) in x.amplitudes().iter().zip(expected) {
            assert!((a.re - e).abs() < 1e-15 && a.im.abs() < 1e-15);
        }
    }

    #[test]
    fn coherent_state_mean_direction() {
        let space = SpinSpace::new(17).unwrap();
        let (theta, phi) = (2.1, -0.8);
        let psi = coherent_state(&space, theta, phi);
        let mean = psi.mean_spin();
        let s = space.spin();
        let dir = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        for i in 0..3 {
            assert!((mean[i] - s * dir[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn coherent_state_large_n_is_normalized() {
        let space = SpinSpace::new(4096).unwrap();
        let psi = coherent_state(&space, 1.3, 0.2);
        assert!((psi.norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn encoding_sign_and_period() {
        let space = SpinSpace::new(100).unwrap();
        let sy = collective_operator(&space, Axis::Y);
        let css = coherent_state(&space, FRAC_PI_2, 0.0);
        let rotated = css.encode_phase(0.3);
        let ratio = rotated.expectation(&sy).unwrap() / space.spin();
        assert!((ratio - 0.3f64.sin()).abs() < 1e-10);

        assert!((css.encode_phase(0.0).amplitudes() - css.amplitudes()).camax() == 0.0);
        let wrapped = css.encode_phase(2.0 * PI);
        assert!((wrapped.amplitudes() - css.amplitudes()).camax() < 1e-12);
    }

    #[test]
    fn sy_distribution_examples() {
        let space = SpinSpace::new(2).unwrap();
        let p = coherent_state(&space, FRAC_PI_2, 0.0).sy_distribution();
        for (a, e) in p.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - e).abs() < 1e-12);
        }

        let space = SpinSpace::new(12).unwrap();
        let along_y = coherent_state(&space, FRAC_PI_2, FRAC_PI_2).sy_distribution();
        assert!((along_y[0] - 1.0).abs() < 1e-10);

        let along_x = coherent_state(&space, FRAC_PI_2, 0.0).sy_distribution();
        for (k, p) in along_x.iter().enumerate() {
            let binom = (space.ln_binomial(k) - 12.0 * 2f64.ln()).exp();
            assert!((p - binom).abs() < 1e-12);
        }
    }

    #[test]
    fn moments_of_coherent_state() {
        let space = SpinSpace::new(40).unwrap();
        let css = coherent_state(&space, FRAC_PI_2, 0.0);
        let sx = collective_operator(&space, Axis::X);
        let sy = collective_operator(&space, Axis::Y);
        assert!((css.expectation(&sx).unwrap() - 20.0).abs() < 1e-10);
        assert!((css.variance(&sy).unwrap() - 10.0).abs() < 1e-9);

        let top = DickeState::basis(&space, 0);
        let sz = collective_operator(&space, Axis::Z);
        assert!(top.variance(&sz).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ladder_application_matches_dense() {
        let space = SpinSpace::new(9).unwrap();
        let h = tact_hamiltonian(&space, 1.0);
        let psi = coherent_state(&space, 0.9, 0.4).evolve(&h, 0.05).unwrap();
        for axis in Axis::ALL {
            let dense = collective_operator(&space, axis).matrix() * psi.amplitudes();
            assert!((dense - psi.apply_spin(axis)).camax() < 1e-13);
        }
    }
}
