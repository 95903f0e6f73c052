use num_complex::Complex64;

use super::state::real_power_product;
use super::DickeState;
use crate::error::{Error, Result};

/// Husimi Q(theta, phi) = |<CSS(theta, phi)|psi>|^2 sampled on a product grid.
#[derive(Clone, Debug)]
pub struct HusimiGrid {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Row-major, `values[i * phi.len() + j]` is Q(theta[i], phi[j]).
    pub values: Vec<f64>,
}

impl HusimiGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.phi.len() + j]
    }

    /// Grid location and value of the maximum.
    pub fn peak(&self) -> (f64, f64, f64) {
        let (idx, &q) = self
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid is nonempty");
        let cols = self.phi.len();
        (self.theta[idx / cols], self.phi[idx % cols], q)
    }

    /// Angular standard deviations (major, minor) of Q about its mean
    /// direction, in the tangent plane, with sin(theta) area weights.
    pub fn tangent_widths(&self) -> (f64, f64) {
        let dirs = |i: usize, j: usize| {
            let (st, ct) = self.theta[i].sin_cos();
            let (sp, cp) = self.phi[j].sin_cos();
            [st * cp, st * sp, ct]
        };
        let mut mean = [0.0; 3];
        let mut total = 0.0;
        for i in 0..self.theta.len() {
            let area = self.theta[i].sin();
            for j in 0..self.phi.len() {
                let w = self.at(i, j) * area;
                let n = dirs(i, j);
                (0..3).for_each(|k| mean[k] += w * n[k]);
                total += w;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        if total <= 0.0 || norm <= 0.0 {
            return (0.0, 0.0);
        }
        let m = mean.map(|x| x / norm);
        // Tangent basis: e1 along the larger of m x z and m x y, e2 = m x e1.
        let cross = |a: [f64; 3], b: [f64; 3]| [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]];
        let unit = |v: [f64; 3]| {
            let l = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.map(|x| x / l)
        };
        let (cz, cy) = (cross(m, [0.0, 0.0, 1.0]), cross(m, [0.0, 1.0, 0.0]));
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let e1 = unit(if dot(cz, cz) >= dot(cy, cy) { cz } else { cy });
        let e2 = cross(m, e1);
        let mut c = [0.0; 3];
        for i in 0..self.theta.len() {
            let area = self.theta[i].sin();
            for j in 0..self.phi.len() {
                let w = self.at(i, j) * area / total;
                let n = dirs(i, j);
                let (u, v) = (dot(n, e1), dot(n, e2));
                c[0] += w * u * u;
                c[1] += w * u * v;
                c[2] += w * v * v;
            }
        }
        let half_trace = 0.5 * (c[0] + c[2]);
        let disc = (0.25 * (c[0] - c[2]).powi(2) + c[1] * c[1]).sqrt();
        ((half_trace + disc).sqrt(), (half_trace - disc).max(0.0).sqrt())
    }
}

pub fn husimi_q(state: &DickeState, theta: &[f64], phi: &[f64]) -> Result<HusimiGrid> {
    if theta.is_empty() || phi.is_empty() {
        return Err(Error::EmptyGrid("husimi angles"));
    }
    let space = state.space();
    let n = space.particles();
    let dim = space.dim();
    let amps = state.amplitudes();
    let mut values = Vec::with_capacity(theta.len() * phi.len());
    let mut weights = vec![0.0; dim];
    for &th in theta {
        let (s, c) = (th / 2.0).sin_cos();
        for (k, w) in weights.iter_mut().enumerate() {
            *w = real_power_product(space.ln_binomial(k) / 2.0, c, n - k, s, k);
        }
        for &ph in phi {
            // conj(CSS_k) = w_k e^{-i k ph}
            let step = Complex64::from_polar(1.0, -ph);
            let mut rot = Complex64::new(1.0, 0.0);
            let mut overlap = Complex64::new(0.0, 0.0);
            for k in 0..dim {
                overlap += amps[k] * rot * weights[k];
                rot *= step;
            }
            values.push(overlap.norm_sqr());
        }
    }
    Ok(HusimiGrid {
        theta: theta.to_vec(),
        phi: phi.to_vec(),
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{coherent_state, tact_hamiltonian, SpinSpace};
    use std::f64::consts::PI;

    fn midpoint(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn coherent_state_peaks_at_its_direction() {
        let space = SpinSpace::new(30).unwrap();
        let theta: Vec<f64> = (0..=40).map(|i| PI * i as f64 / 40.0).collect();
        let phi: Vec<f64> = (0..80).map(|j| -PI + 2.0 * PI * j as f64 / 80.0).collect();
        let (t0, p0) = (theta[13], phi[51]);
        let q = husimi_q(&coherent_state(&space, t0, p0), &theta, &phi).unwrap();
        let (t, p, v) = q.peak();
        assert_eq!((t, p), (t0, p0));
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn resolution_of_identity() {
        let space = SpinSpace::new(20).unwrap();
        let h = tact_hamiltonian(&space, 1.0);
        let psi = coherent_state(&space, PI / 2.0, 0.0).evolve(&h, 0.04).unwrap();
        let theta = midpoint(200, 0.0, PI);
        let phi = midpoint(200, -PI, PI);
        let q = husimi_q(&psi, &theta, &phi).unwrap();
        let (dt, dp) = (PI / 200.0, 2.0 * PI / 200.0);
        let mut integral = 0.0;
        for (i, th) in theta.iter().enumerate() {
            for j in 0..phi.len() {
                integral += q.at(i, j) * th.sin() * dt * dp;
            }
        }
        let expected = 4.0 * PI / 21.0;
        assert!((integral / expected - 1.0).abs() < 0.01, "{integral} vs {expected}");
    }

    #[test]
    fn invariant_under_joint_rotation() {
        let space = SpinSpace::new(16).unwrap();
        let h = tact_hamiltonian(&space, 1.0);
        let psi = coherent_state(&space, 1.2, 0.3).evolve(&h, 0.05).unwrap();
        let alpha = 0.77;
        let rotated = psi.rotate([0.0, 0.0, 1.0], alpha);
        let theta = midpoint(15, 0.0, PI);
        let phi = midpoint(24, -PI, PI);
        let shifted: Vec<f64> = phi.iter().map(|p| p + alpha).collect();
        let a = husimi_q(&psi, &theta, &phi).unwrap();
        let b = husimi_q(&rotated, &theta, &shifted).unwrap();
        let dev = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-8, "{dev}");
    }

    #[test]
    fn twisting_makes_q_anisotropic() {
        let space = SpinSpace::new(40).unwrap();
        let theta = midpoint(90, 0.0, PI);
        let phi = midpoint(180, -PI, PI);
        let css = coherent_state(&space, PI / 2.0, 0.0);
        let (a, b) = husimi_q(&css, &theta, &phi).unwrap().tangent_widths();
        assert!((a / b - 1.0).abs() < 0.02, "{a} {b}");
        let squeezed = css.evolve(&tact_hamiltonian(&space, 1.0), 0.03).unwrap();
        let (a, b) = husimi_q(&squeezed, &theta, &phi).unwrap().tangent_widths();
        assert!(a / b > 1.5, "{a} {b}");
    }

    #[test]
    fn empty_grid_is_rejected() {
        let space = SpinSpace::new(3).unwrap();
        let psi = coherent_state(&space, 1.0, 0.0);
        assert!(husimi_q(&psi, &[], &[0.0]).is_err());
    }
}
