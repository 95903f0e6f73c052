use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::spin::DickeState;

/// Wineland parameter N Var(S_perp,min) / |<S>|^2.
pub fn wineland(state: &DickeState) -> Result<f64> {
    let space = state.space();
    let mean = Vector3::from(state.mean_spin());
    let len = mean.norm();
    if len <= 1e-9 * space.spin() {
        return Err(Error::UndefinedMetric(len));
    }
    let n = mean / len;
    // Orthonormal pair spanning the plane perpendicular to the mean spin.
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let v = n.cross(&u);
    let second = Matrix3::from(state.second_moments());
    let cov = second - mean * mean.transpose();
    let cuu = (u.transpose() * cov * u)[0];
    let cvv = (v.transpose() * cov * v)[0];
    let cuv = (u.transpose() * cov * v)[0];
    let min_var = 0.5 * (cuu + cvv) - (0.25 * (cuu - cvv).powi(2) + cuv * cuv).sqrt();
    Ok(space.particles() as f64 * min_var / (len * len))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::{coherent_state, tact_hamiltonian, SpinSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coherent_states_are_at_the_limit() {
        let space = SpinSpace::new(37).unwrap();
        for (th, ph) in [(0.0, 0.0), (1.0, 2.0), (std::f64::consts::FRAC_PI_2, 0.0), (2.9, -1.3)] {
            let x = wineland(&coherent_state(&space, th, ph)).unwrap();
            assert!((x - 1.0).abs() < 1e-9, "{th} {ph}: {x}");
        }
    }

    #[test]
    fn rotation_invariant() {
        let space = SpinSpace::new(40).unwrap();
        let h = tact_hamiltonian(&space, 1.0);
        let psi = coherent_state(&space, std::f64::consts::FRAC_PI_2, 0.0)
            .evolve(&h, 0.015)
            .unwrap();
        let base = wineland(&psi).unwrap();
        assert!(base < 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..5 {
            let axis = [rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5];
            let angle = rng.random::<f64>() * 6.0;
            let x = wineland(&psi.rotate(axis, angle)).unwrap();
            assert!((x - base).abs() < 1e-8);
        }
    }

    #[test]
    fn collapsed_mean_spin_is_rejected() {
        let space = SpinSpace::new(4).unwrap();
        let dicke = DickeState::basis(&space, 2);
        assert!(matches!(wineland(&dicke), Err(Error::UndefinedMetric(_))));
    }
}
