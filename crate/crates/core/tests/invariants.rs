use proptest::prelude::*;

use qdsense::estimation::{evaluate, gaussian_prior};
use qdsense::oqi::oqi_limit;
use qdsense::protocol::{outcome_distribution, response_curve, NoiseModel, ProtocolSpec};
use qdsense::spin::{coherent_state, husimi_q, tact_hamiltonian, SpinSpace};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn space_grid_is_unit_spaced(n in 1usize..300) {
        let s = SpinSpace::new(n).unwrap();
        let m = s.m_grid();
        prop_assert_eq!(s.dim(), n + 1);
        prop_assert_eq!(s.spin(), n as f64 / 2.0);
        prop_assert_eq!(m[0], s.spin());
        prop_assert!(m.windows(2).all(|w| w[0] - w[1] == 1.0));
    }

    #[test]
    fn operations_preserve_the_norm(
        n in 1usize..80, theta in 0.0..std::f64::consts::PI, az in -3.2..3.2f64,
        t in -0.1..0.1f64, phi in -7.0..7.0f64, angle in -3.2..3.2f64,
    ) {
        let space = SpinSpace::new(n).unwrap();
        let h = tact_hamiltonian(&space, 1.0);
        prop_assert!(h.hermiticity_residual() <= 1e-12);
        let psi = coherent_state(&space, theta, az);
        let out = psi.evolve(&h, t).unwrap().encode_phase(phi).rotate([0.2, -0.5, 0.7], angle);
        prop_assert!((out.norm() - 1.0).abs() <= 1e-10);
        let p = out.sy_distribution();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn qd_response_is_odd_in_phase(t1 in 0.0..0.03f64, t2 in 0.0..0.03f64, phi in 0.0..3.0f64) {
        let spec = ProtocolSpec::deamplified(40, t1, t2);
        let r = response_curve(&spec, &[phi, -phi]).unwrap();
        prop_assert!((r[0] + r[1]).abs() <= 1e-10);
    }

    #[test]
    fn noisy_outcomes_are_distributions(t1 in 0.0..0.05f64, t2 in -0.05..0.05f64, phi in -3.2..3.2f64, sigma in 0.0..5.0f64) {
        let p = outcome_distribution(&ProtocolSpec::deamplified(30, t1, t2), phi, &NoiseModel::new(sigma).unwrap()).unwrap();
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn bmse_never_exceeds_the_prior(t1 in 0.0..0.05f64, t2 in -0.05..0.05f64, dp in 0.05..1.5f64, sigma in 0.0..4.0f64) {
        let prior = gaussian_prior(dp, 40).unwrap();
        let r = evaluate(&ProtocolSpec::deamplified(30, t1, t2), &prior, &NoiseModel::new(sigma).unwrap()).unwrap();
        prop_assert!(r.bmse >= 0.0);
        prop_assert!(r.bmse <= prior.second_moment() * (1.0 + 1e-12));
    }

    #[test]
    fn husimi_q_is_a_probability(n in 1usize..40, theta in 0.0..3.1f64, az in -3.1..3.1f64) {
        let space = SpinSpace::new(n).unwrap();
        let state = coherent_state(&space, theta, az);
        let grid: Vec<f64> = (0..9).map(|i| i as f64 * 0.39).collect();
        let q = husimi_q(&state, &grid, &grid).unwrap();
        for i in 0..grid.len() {
            for j in 0..grid.len() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&q.at(i, j)));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn oqi_bounds_single_encoding_protocols(t1 in 0.0..0.1f64, t2 in 0.0..0.1f64, dp in 0.2..1.2f64) {
        let prior = gaussian_prior(dp, 60).unwrap();
        let spec = ProtocolSpec::deamplified(12, t1, t2);
        let protocol = evaluate(&spec, &prior, &NoiseModel::noiseless()).unwrap().bmse;
        let bound = oqi_limit(&SpinSpace::new(12).unwrap(), &prior, 1e-10, 300, &[]).unwrap();
        prop_assert!(bound.bmse <= protocol + 1e-8, "{} > {}", bound.bmse, protocol);
    }
}
