use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::wineland;
use crate::protocol::{ProtocolSpec, TwistEngine};

/// Wineland parameter along the phi = 0 twisting trajectory of a QD protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezingTrace {
    pub times: Vec<f64>,
    pub xi2: Vec<f64>,
    pub probe_time: f64,
    pub final_time: f64,
    pub probe_xi2: f64,
    pub final_xi2: f64,
}

pub fn squeezing_trace(spec: &ProtocolSpec, step: f64) -> Result<SqueezingTrace> {
    if spec.slots() != 1 {
        return Err(Error::InvalidSpec("squeezing trace needs a two-segment protocol".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidSpec("trace step must be positive".into()));
    }
    let engine = TwistEngine::for_spec(spec)?;
    let probe_time = spec.times[0];
    let final_time = spec.times[0] + spec.times[1];
    let end = probe_time.max(final_time).max(0.0);
    let steps = (end / step).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut xi2 = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = (k as f64 * step).min(end);
        times.push(t);
        xi2.push(wineland(&engine.probe(t))?);
    }
    Ok(SqueezingTrace {
        times,
        xi2,
        probe_time,
        final_time,
        probe_xi2: wineland(&engine.probe(probe_time))?,
        final_xi2: wineland(&engine.probe(final_time))?,
    })
}

/// Smallest Wineland parameter reached by twisting the +x coherent state,
/// scanned on t = 0, step, ..., t_max. Returns (time, xi2).
pub fn squeezing_scan(particles: usize, chi: f64, t_max: f64, step: f64) -> Result<(f64, f64)> {
    if !(step > 0.0 && t_max >= 0.0) {
        return Err(Error::InvalidSpec("scan needs step > 0 and t_max >= 0".into()));
    }
    let engine = TwistEngine::shared(particles, chi)?;
    let steps = (t_max / step).round() as usize;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=steps {
        let t = k as f64 * step;
        let x = wineland(&engine.probe(t))?;
        if x < best.1 {
            best = (t, x);
        }
    }
    Ok(best)
}
