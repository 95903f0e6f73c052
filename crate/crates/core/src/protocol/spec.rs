use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reporting tag for an interferometer sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProtocolKind {
    /// Classical Ramsey with a coherent probe.
    Css,
    /// Squeezed probe, direct readout.
    Sss,
    /// Squeeze, encode, squeeze further (deamplification).
    Qd,
    /// Squeeze, encode, unsqueeze (amplification).
    Qa,
    /// n encodings interleaved with n+1 twisting segments.
    Sequential(usize),
    Custom,
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolKind::Css => write!(f, "CSS"),
            ProtocolKind::Sss => write!(f, "SSS"),
            ProtocolKind::Qd => write!(f, "QD"),
            ProtocolKind::Qa => write!(f, "QA"),
            ProtocolKind::Sequential(n) => write!(f, "SEQ({n})"),
            ProtocolKind::Custom => write!(f, "CUSTOM"),
        }
    }
}

/// An interferometer sequence on N atoms starting from the +x coherent state.
///
/// `times[0]` twists the probe, then each slot i encodes `slot_fractions[i] * phi`
/// and is followed by the twisting segment `times[i + 1]`. A segment of duration
/// t applies exp(+i t H_TACT): positive times squeeze the S_y readout quadrature,
/// negative times anti-squeeze it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub particles: usize,
    pub chi: f64,
    pub times: Vec<f64>,
    pub slot_fractions: Vec<f64>,
    pub kind: ProtocolKind,
}

impl ProtocolSpec {
    pub fn classical(particles: usize) -> Self {
        Self::single_slot(particles, 0.0, 0.0, ProtocolKind::Css)
    }

    pub fn squeezed(particles: usize, t1: f64) -> Self {
        Self::single_slot(particles, t1, 0.0, ProtocolKind::Sss)
    }

    pub fn deamplified(particles: usize, t1: f64, t2: f64) -> Self {
        Self::single_slot(particles, t1, t2, ProtocolKind::Qd)
    }

    /// `t2` is normally negative (unsqueezing).
    pub fn amplified(particles: usize, t1: f64, t2: f64) -> Self {
        Self::single_slot(particles, t1, t2, ProtocolKind::Qa)
    }

    /// n = times.len() - 1 encodings, each carrying 1/n of the total phase.
    pub fn sequential(particles: usize, times: Vec<f64>) -> Self {
        let n = times.len().saturating_sub(1).max(1);
        Self {
            particles,
            chi: 1.0,
            times,
            slot_fractions: vec![1.0 / n as f64; n],
            kind: ProtocolKind::Sequential(n),
        }
    }

    pub fn custom(particles: usize, times: Vec<f64>, slot_fractions: Vec<f64>) -> Self {
        Self {
            particles,
            chi: 1.0,
            times,
            slot_fractions,
            kind: ProtocolKind::Custom,
        }
    }

    fn single_slot(particles: usize, t1: f64, t2: f64, kind: ProtocolKind) -> Self {
        Self {
            particles,
            chi: 1.0,
            times: vec![t1, t2],
            slot_fractions: vec![1.0],
            kind,
        }
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_times(&self, times: &[f64]) -> Self {
        Self {
            times: times.to_vec(),
            ..self.clone()
        }
    }

    pub fn slots(&self) -> usize {
        self.slot_fractions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.slot_fractions.is_empty() {
            return bad("at least one encoding slot is required".into());
        }
        if self.times.len() != self.slot_fractions.len() + 1 {
            return bad(format!(
                "{} segment times for {} slots (need slots + 1)",
                self.times.len(),
                self.slot_fractions.len()
            ));
        }
        if !self.chi.is_finite() || self.times.iter().any(|t| !t.is_finite()) {
            return bad("non-finite coupling or segment time".into());
        }
        if self.slot_fractions.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return bad("slot fractions must be finite and nonnegative".into());
        }
        let total: f64 = self.slot_fractions.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("slot fractions sum to {total}, expected 1"));
        }
        if self.particles == 0 || self.particles > crate::spin::MAX_PARTICLES {
            return Err(Error::Size(self.particles));
        }
        Ok(())
    }
}

/// Gaussian readout blur in outcome (m) units.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_det: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { sigma_det: 0.0 }
    }

    pub fn new(sigma_det: f64) -> Result<Self> {
        if !(sigma_det.is_finite() && sigma_det >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "detection noise must be finite and >= 0, got {sigma_det}"
            )));
        }
        Ok(Self { sigma_det })
    }

    pub fn is_noiseless(&self) -> bool {
        self.sigma_det == 0.0
    }
}
