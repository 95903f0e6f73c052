use serde::{Deserialize, Serialize};

use super::simplex::SearchSpace;
use crate::error::{Error, Result};
use crate::protocol::ProtocolSpec;

/// Upper time bound at N = 100, chi = 1.
pub const REFERENCE_TIME_BOUND: f64 = 0.05;

/// Default squeezing-time bound, scaled as 1/(N chi).
pub fn default_time_bound(particles: usize, chi: f64) -> f64 {
    REFERENCE_TIME_BOUND * 100.0 / (particles as f64 * chi.abs())
}

/// A protocol whose times at `free` indices are optimized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub label: String,
    pub base: ProtocolSpec,
    pub free: Vec<usize>,
    /// Free times may take either sign.
    pub signed: bool,
}

impl Template {
    pub fn new(label: &str, base: ProtocolSpec, free: Vec<usize>, signed: bool) -> Result<Self> {
        base.validate()?;
        if free.iter().any(|&i| i >= base.times.len()) || free.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec(format!("bad free indices {free:?}")));
        }
        Ok(Self {
            label: label.to_string(),
            base,
            free,
            signed,
        })
    }

    pub fn classical(particles: usize, chi: f64) -> Self {
        Self::new("css", ProtocolSpec::classical(particles).with_chi(chi), vec![], false)
            .expect("valid template")
    }

    pub fn squeezed(particles: usize, chi: f64) -> Self {
        Self::new("sss", ProtocolSpec::squeezed(particles, 0.0).with_chi(chi), vec![0], false)
            .expect("valid template")
    }

    pub fn deamplified(particles: usize, chi: f64) -> Self {
        Self::new("qd", ProtocolSpec::deamplified(particles, 0.0, 0.0).with_chi(chi), vec![0, 1], false)
            .expect("valid template")
    }

    /// QA-type template: both times sign-free.
    pub fn amplified(particles: usize, chi: f64) -> Self {
        Self::new("qa", ProtocolSpec::amplified(particles, 0.0, 0.0).with_chi(chi), vec![0, 1], true)
            .expect("valid template")
    }

    /// Sequential QD of the given order with uniform slot fractions.
    pub fn sequential(particles: usize, chi: f64, order: usize) -> Result<Self> {
        let spec = ProtocolSpec::sequential(particles, vec![0.0; order + 1]).with_chi(chi);
        Self::new(&format!("seq{order}"), spec, (0..=order).collect(), false)
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    pub fn default_space(&self) -> SearchSpace {
        let hi = default_time_bound(self.base.particles, self.base.chi);
        let lo = if self.signed { -hi } else { 0.0 };
        SearchSpace::uniform(self.dim(), lo, hi).expect("positive bound")
    }

    /// Bounds for a two-segment template with the second twist reversed:
    /// t1 in [0, T], t2 in [-T, 0].
    pub fn amplifying_space(&self) -> SearchSpace {
        let hi = default_time_bound(self.base.particles, self.base.chi);
        let mut bounds = vec![(0.0, hi); self.dim()];
        if let Some(last) = bounds.last_mut() {
            *last = (-hi, 0.0);
        }
        SearchSpace::new(bounds).expect("positive bound")
    }

    pub fn spec_at(&self, x: &[f64]) -> ProtocolSpec {
        let mut times = self.base.times.clone();
        for (&i, &v) in self.free.iter().zip(x) {
            times[i] = v;
        }
        self.base.with_times(&times)
    }

    /// Free coordinates reproducing `other` exactly, when it lies in this
    /// template's family. A zero-length segment merges two adjacent slots,
    /// so lower-order sequences embed by inserting a zero time.
    pub fn embed(&self, other: &ProtocolSpec) -> Option<Vec<f64>> {
        if other.particles != self.base.particles || other.chi != self.base.chi {
            return None;
        }
        let fractions_match = |a: &[f64], b: &[f64]| {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
        };
        let mut candidates = Vec::new();
        if fractions_match(&other.slot_fractions, &self.base.slot_fractions) {
            candidates.push(other.times.clone());
        }
        let f = &self.base.slot_fractions;
        if f.len() == other.slot_fractions.len() + 1 {
            for i in 0..f.len() - 1 {
                let mut merged = f.to_vec();
                merged[i] += merged.remove(i + 1);
                if fractions_match(&merged, &other.slot_fractions) {
                    let mut times = other.times.clone();
                    times.insert(i + 1, 0.0);
                    candidates.push(times);
                }
            }
        }
        candidates.into_iter().find_map(|times| {
            let fixed_ok = (0..times.len())
                .filter(|i| !self.free.contains(i))
                .all(|i| times[i] == self.base.times[i]);
            let x: Vec<f64> = self.free.iter().map(|&i| times[i]).collect();
            (fixed_ok && self.default_space().contains(&x)).then_some(x)
        })
    }
}
