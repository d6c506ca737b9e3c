//! Path loss, fading, interference aggregation, and SINR evaluation.
//!
//! The path loss is `min(r^-alpha, 1)`: bounded at short range, power-law
//! beyond unit distance. Fades are exponential with rate `mu`, drawn fresh per
//! link and slot. A transmission succeeds in a slot when the SINR at the
//! receiver exceeds the threshold `beta`; the MAC indicators (transmitter on,
//! receiver off) are applied by the caller, which treats the SINR as zero
//! otherwise.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::spatial::Point;

/// Radio channel parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Path-loss exponent, must exceed 2 for the aggregate interference to be
    /// finite on the plane.
    pub alpha: f64,
    /// Fading rate; mean fade power is `1/mu`.
    pub mu: f64,
    /// Additive noise variance, strictly positive in every configuration so
    /// the SINR denominator never vanishes.
    pub noise: f64,
    /// Interference suppression (processing gain) factor, in (0, 1).
    pub gamma: f64,
    /// SINR success threshold.
    pub beta: f64,
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 2.0) || !self.alpha.is_finite() {
            return Err(SimError::Parameter(format!("alpha must exceed 2, got {}", self.alpha)));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(SimError::Parameter(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.noise > 0.0) || !self.noise.is_finite() {
            return Err(SimError::Parameter(format!("noise must be positive, got {}", self.noise)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(SimError::Parameter(format!("gamma must lie in (0, 1), got {}", self.gamma)));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(SimError::Parameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

/// Distance attenuation `min(r^-alpha, 1)`.
#[inline]
pub fn path_loss(r: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(SimError::Parameter(format!("distance must be positive, got {r}")));
    }
    Ok(if r >= 1.0 { r.powf(-alpha) } else { 1.0 })
}

/// One exponential fade with rate `mu`.
pub fn sample_fading(mu: f64, rng: &mut impl Rng) -> Result<f64> {
    let exp = Exp::new(mu).map_err(|_| SimError::Parameter(format!("fading rate {mu}")))?;
    Ok(exp.sample(rng))
}

/// Snapshot of one potential transmitter in a slot.
#[derive(Debug, Clone, Copy)]
pub struct TransmitterState {
    pub position: Point,
    pub power: f64,
    pub on: bool,
}

/// Aggregate interference at `receiver`: the sum of `power * fade * loss`
/// over transmitters that are on and not excluded. The caller excludes at
/// least the signal transmitter and the receiver itself.
pub fn interference(
    receiver: Point,
    transmitters: &[TransmitterState],
    excluded: &[Point],
    fades: &[f64],
    alpha: f64,
) -> Result<f64> {
    if transmitters.len() != fades.len() {
        return Err(SimError::Parameter(format!(
            "{} transmitters but {} fades",
            transmitters.len(),
            fades.len()
        )));
    }
    let mut total = 0.0;
    for (t, &h) in transmitters.iter().zip(fades) {
        if !t.on || excluded.contains(&t.position) {
            continue;
        }
        let r = t.position.distance(receiver);
        if r == 0.0 {
            return Err(SimError::Geometry("transmitter coincides with receiver".into()));
        }
        total += t.power * h * path_loss(r, alpha)?;
    }
    Ok(total)
}

/// SINR value `power * fade * loss / (gamma * interference + noise)`.
#[inline]
pub fn sinr(power: f64, fade: f64, loss: f64, interference: f64, gamma: f64, noise: f64) -> Result<f64> {
    let denom = gamma * interference + noise;
    if !(denom > 0.0) {
        return Err(SimError::Model(format!("non-positive SINR denominator {denom}")));
    }
    Ok(power * fade * loss / denom)
}
