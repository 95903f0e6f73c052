use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::ProtocolSpec;
use crate::error::Result;
use crate::spin::{coherent_state, tact_hamiltonian, DickeState, HermitianOperator, SpinSpace};

/// Precomputed twisting eigensystem and readout map for one (N, chi).
pub struct TwistEngine {
    space: SpinSpace,
    twist: HermitianOperator,
    /// W^dagger V: twisting eigenbasis -> S_y outcome amplitudes.
    readout: DMatrix<Complex64>,
    /// +x coherent state in the twisting eigenbasis.
    initial: DVector<Complex64>,
}

type EngineKey = (usize, u64);

fn registry() -> &'static Mutex<HashMap<EngineKey, Arc<TwistEngine>>> {
    static ENGINES: OnceLock<Mutex<HashMap<EngineKey, Arc<TwistEngine>>>> = OnceLock::new();
    ENGINES.get_or_init(Default::default)
}

impl TwistEngine {
    /// Shared engine for (N, chi); built once per process.
    pub fn shared(particles: usize, chi: f64) -> Result<Arc<TwistEngine>> {
        let key = (particles, chi.to_bits());
        if let Some(e) = registry().lock().unwrap().get(&key) {
            return Ok(e.clone());
        }
        let engine = Arc::new(TwistEngine::new(particles, chi)?);
        Ok(registry()
            .lock()
            .unwrap()
            .entry(key)
            .or_insert(engine)
            .clone())
    }

    pub fn new(particles: usize, chi: f64) -> Result<Self> {
        let space = SpinSpace::new(particles)?;
        let twist = tact_hamiltonian(&space, chi);
        let spectral = twist.spectral();
        let readout = space.sy_basis().ad_mul(&spectral.vectors);
        let css = coherent_state(&space, std::f64::consts::FRAC_PI_2, 0.0);
        let initial = spectral.vectors.ad_mul(css.amplitudes());
        Ok(Self {
            space,
            twist,
            readout,
            initial,
        })
    }

    pub fn for_spec(spec: &ProtocolSpec) -> Result<Arc<TwistEngine>> {
        spec.validate()?;
        Self::shared(spec.particles, spec.chi)
    }

    pub fn space(&self) -> &SpinSpace {
        &self.space
    }

    pub fn twist(&self) -> &HermitianOperator {
        &self.twist
    }

    /// Phases for a protocol segment of duration t, i.e. exp(+i t H_TACT).
    fn segment(&self, coeffs: &mut DVector<Complex64>, t: f64) {
        self.twist.spectral().apply_phases(coeffs, -t);
    }

    /// Probe state after the first twisting segment, in the S_z basis.
    pub fn probe(&self, t1: f64) -> DickeState {
        let mut coeffs = self.initial.clone();
        self.segment(&mut coeffs, t1);
        DickeState::from_parts(self.space.clone(), &self.twist.spectral().vectors * coeffs)
    }

    pub fn prepare<'a>(&'a self, spec: &'a ProtocolSpec) -> PreparedSequence<'a> {
        PreparedSequence {
            engine: self,
            spec,
            probe: self.probe(spec.times[0]),
        }
    }
}

/// A sequence with its phase-independent first segment already applied.
pub struct PreparedSequence<'a> {
    engine: &'a TwistEngine,
    spec: &'a ProtocolSpec,
    probe: DickeState,
}

impl PreparedSequence<'_> {
    pub fn probe(&self) -> &DickeState {
        &self.probe
    }

    /// Final-state coefficients in the twisting eigenbasis.
    fn final_coefficients(&self, phi: f64) -> DVector<Complex64> {
        let e = self.engine;
        let vectors = &e.twist.spectral().vectors;
        let slots = self.spec.slots();
        let mut z = self.probe.amplitudes().clone();
        let mut coeffs = DVector::zeros(0);
        for (i, f) in self.spec.slot_fractions.iter().enumerate() {
            crate::spin::encode_in_place(&e.space, &mut z, f * phi);
            coeffs = vectors.ad_mul(&z);
            e.segment(&mut coeffs, self.spec.times[i + 1]);
            if i + 1 < slots {
                z = vectors * &coeffs;
            }
        }
        coeffs
    }

    pub fn final_state(&self, phi: f64) -> DickeState {
        let coeffs = self.final_coefficients(phi);
        DickeState::from_parts(
            self.engine.space.clone(),
            &self.engine.twist.spectral().vectors * coeffs,
        )
    }

    /// Noiseless S_y outcome probabilities, indexed like the m grid.
    pub fn sy_probabilities(&self, phi: f64) -> Vec<f64> {
        let coeffs = self.final_coefficients(phi);
        (&self.engine.readout * coeffs)
            .iter()
            .map(|z| z.norm_sqr())
            .collect()
    }
}
