//! Per-slot and episode QoE: log-bitrate quality, a switching penalty and a
//! rebuffer penalty on the slot delay beyond the delay constraint.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Delays are capped at this multiple of `T_c` before entering the QoE.
pub const DELAY_CAP_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QoeWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma_rebuf: f64,
    /// Delay constraint, s.
    pub delay_constraint: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Slot length, s.
    pub slot: f64,
}

impl Default for QoeWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma_rebuf: 4.3,
            delay_constraint: 1.0,
            v_min: 50e3,
            v_max: 2e6,
            slot: 1.0,
        }
    }
}

impl QoeWeights {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(format!("qoe: {what}")));
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.gamma_rebuf >= 0.0) {
            return bad("weights must be >= 0");
        }
        if !(self.v_min > 0.0 && self.v_min <= self.v_max) {
            return bad("need 0 < v_min <= v_max");
        }
        if !(self.delay_constraint > 0.0) {
            return bad("delay_constraint must be > 0");
        }
        if !(self.slot > 0.0) {
            return bad("slot must be > 0");
        }
        Ok(())
    }

    pub fn delay_cap(&self) -> f64 {
        DELAY_CAP_FACTOR * self.delay_constraint
    }
}

/// One slot's QoE inputs and result.
#[derive(Debug, Clone, PartialEq)]
pub struct QoeSample {
    pub slot: usize,
    pub bitrates: Vec<f64>,
    pub previous_bitrates: Vec<f64>,
    pub delays: Vec<f64>,
    pub slot_delay: f64,
    pub qoe: f64,
}

impl QoeSample {
    pub fn evaluate(
        slot: usize,
        bitrates: Vec<f64>,
        previous_bitrates: Vec<f64>,
        delays: Vec<f64>,
        w: &QoeWeights,
    ) -> Result<Self> {
        let slot_delay = slot_delay(&delays)?;
        let qoe = qoe_slot(&bitrates, &previous_bitrates, slot_delay, w)?;
        Ok(Self {
            slot,
            bitrates,
            previous_bitrates,
            delays,
            slot_delay,
            qoe,
        })
    }
}

/// `b / R`; an empty link with a nonempty chunk never finishes.
pub fn transmission_delay(bits: f64, rate: f64) -> f64 {
    if bits == 0.0 {
        0.0
    } else if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}

/// The ground user decodes all streams in parallel, so the slot waits for
/// the slowest one.
pub fn slot_delay(delays: &[f64]) -> Result<f64> {
    delays
        .iter()
        .copied()
        .reduce(f64::max)
        .ok_or(Error::EmptyInput("slot_delay needs at least one delay"))
}

/// `ln(V / V_min)`.
pub fn quality(v: f64, w: &QoeWeights) -> Result<f64> {
    if !(v >= w.v_min) {
        return Err(Error::InvalidBitrate { value: v, min: w.v_min });
    }
    Ok((v / w.v_min).ln())
}

pub fn qoe_slot(current: &[f64], previous: &[f64], slot_delay: f64, w: &QoeWeights) -> Result<f64> {
    if current.is_empty() {
        return Err(Error::EmptyInput("qoe_slot needs at least one uav"));
    }
    if current.len() != previous.len() {
        return Err(Error::LengthMismatch(format!(
            "{} current vs {} previous bitrates",
            current.len(),
            previous.len()
        )));
    }
    let mut per_uav = 0.0;
    for (&v, &vp) in current.iter().zip(previous) {
        let q = quality(v, w)?;
        let qp = quality(vp, w)?;
        per_uav += w.alpha * q - w.beta * (q - qp).abs();
    }
    let delay = slot_delay.min(w.delay_cap());
    let rebuffer = (delay - w.delay_constraint).max(0.0);
    Ok(per_uav / current.len() as f64 - w.gamma_rebuf * rebuffer)
}

pub fn episode_qoe(samples: &[QoeSample]) -> f64 {
    samples.iter().map(|s| s.qoe).sum()
}
