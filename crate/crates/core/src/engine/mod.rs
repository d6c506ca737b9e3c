//! Slotted-time simulation: per-hop exit-time experiments, tagged-packet
//! traversal under conic forwarding, and the virtual-interferer augmentation
//! that dominates the real delays with a stationary sequence.
//!
//! Replications are embarrassingly parallel: each derives its own random
//! streams from the master seed and replication index, so results are
//! independent of worker count and arrival order.

mod contention;
mod exit;
mod traversal;
mod virtuals;
mod world;

pub use contention::HopResult;
pub use exit::{
    j_bound_for_replication, run_exit_time, run_exit_time_replays, worst_case_laplace_mc,
    ExitOutcome, LaplaceMc,
};
pub use traversal::{
    geometric_hop_samples, information_velocity, run_paired_traversal, run_traversal, PacketTrace,
    TerminationReason, VelocityEstimate,
};
pub use virtuals::{backward_chain, refill_void, sample_hop_law, VirtualNode};
pub use world::{TaggedLink, World};

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::error::{Result, SimError};
use crate::protocol::{AlohaPolicy, ConeChoiceModel, Policy, PowerControlPolicy};
use crate::spatial::{ConePartition, Window};

/// Which transmission policy drives the nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    PowerControl,
    Aloha,
}

/// Full model parameterization of one experiment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SimParams {
    /// Node intensity lambda (points per unit area).
    pub intensity: f64,
    /// Path-loss exponent, > 2.
    pub alpha: f64,
    /// Fading rate.
    pub mu: f64,
    /// SINR threshold.
    pub beta: f64,
    /// Interference suppression factor in (0, 1).
    pub gamma: f64,
    /// Additive noise variance, > 0.
    pub noise: f64,
    /// Average power constraint M.
    pub avg_power: f64,
    /// Power-control slack in (0, 1).
    pub epsilon: f64,
    /// Number of cones m (half-angle pi/m), at least 5.
    pub cones: usize,
    /// Window extent along x.
    pub window_x: f64,
    /// Window extent along y.
    pub window_y: f64,
    /// Guard margin between the measurement region and the window boundary.
    pub guard: f64,
    /// Maximum number of slots before a run is censored.
    pub horizon: u64,
    /// Replication count for experiments made of independent runs.
    pub replications: u64,
    /// Master seed; every stream in a run derives from it.
    pub seed: u64,
    pub policy: PolicyKind,
    pub cone_mode: ConeChoiceModel,
    /// Enable the virtual-interferer augmentation in traversal runs.
    pub stationary: bool,
    /// Fixed transmit power of the ALOHA baseline.
    pub aloha_power: f64,
    /// Fixed transmit probability of the ALOHA baseline.
    pub aloha_prob: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            intensity: 1.0,
            alpha: 4.0,
            mu: 1.0,
            beta: 0.5,
            gamma: 0.5,
            noise: 0.1,
            avg_power: 1.0,
            epsilon: 0.1,
            cones: 6,
            window_x: 40.0,
            window_y: 40.0,
            guard: 20.0,
            horizon: 10_000,
            replications: 10_000,
            seed: 42,
            policy: PolicyKind::PowerControl,
            cone_mode: ConeChoiceModel::UniformRandom,
            stationary: false,
            aloha_power: 2.0,
            aloha_prob: 0.5,
        }
    }
}

impl SimParams {
    /// Checks hard invariants; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.channel().validate()?;
        if !(self.intensity > 0.0) || !self.intensity.is_finite() {
            return Err(SimError::Parameter(format!("intensity must be positive, got {}", self.intensity)));
        }
        if !(self.avg_power > 0.0) || !self.avg_power.is_finite() {
            return Err(SimError::Parameter(format!("avg_power must be positive, got {}", self.avg_power)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SimError::Parameter(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        ConePartition::new(self.cones)?;
        if !(self.guard > 0.0) || !self.guard.is_finite() {
            return Err(SimError::Parameter(format!("guard must be positive, got {}", self.guard)));
        }
        if self.window_x < 2.0 * self.guard || self.window_y < 2.0 * self.guard {
            return Err(SimError::Parameter(format!(
                "window {}x{} smaller than twice the guard {}",
                self.window_x, self.window_y, self.guard
            )));
        }
        if self.horizon == 0 {
            return Err(SimError::Parameter("horizon must be at least 1".into()));
        }
        if self.replications == 0 {
            return Err(SimError::Parameter("replications must be at least 1".into()));
        }
        AlohaPolicy::new(self.aloha_power, self.aloha_prob)?;
        PowerControlPolicy::new(self.avg_power, self.epsilon)?;
        let mut warnings = Vec::new();
        if self.policy == PolicyKind::PowerControl && self.beta * self.gamma >= 1.0 {
            warnings.push(format!(
                "beta * gamma = {} >= 1: finite mean exit delay is not guaranteed under power control",
                self.beta * self.gamma
            ));
        }
        Ok(warnings)
    }

    pub fn channel(&self) -> ChannelParams {
        ChannelParams {
            alpha: self.alpha,
            mu: self.mu,
            noise: self.noise,
            gamma: self.gamma,
            beta: self.beta,
        }
    }

    pub fn partition(&self) -> Result<ConePartition> {
        ConePartition::new(self.cones)
    }

    pub fn power_control(&self) -> Result<PowerControlPolicy> {
        PowerControlPolicy::new(self.avg_power, self.epsilon)
    }

    pub fn policy(&self) -> Result<Policy> {
        Ok(match self.policy {
            PolicyKind::PowerControl => Policy::PowerControl(self.power_control()?),
            PolicyKind::Aloha => Policy::Aloha(AlohaPolicy::new(self.aloha_power, self.aloha_prob)?),
        })
    }

    /// Window centered at the origin, for exit-time experiments.
    pub fn centered_window(&self) -> Result<Window> {
        Window::centered(self.window_x, self.window_y)
    }

    /// Strip window starting at x = 0, for traversal experiments.
    pub fn strip_window(&self) -> Result<Window> {
        Window::strip(self.window_x, self.window_y)
    }
}

/// One completed hop of the tagged packet.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HopRecord {
    pub index: usize,
    #[serde(skip)]
    pub source: crate::spatial::Point,
    #[serde(skip)]
    pub dest: crate::spatial::Point,
    /// Hop length `R`.
    pub distance: f64,
    /// Hop angle `theta = arcsin(dy / R)`, in `(-phi, phi)`.
    pub angle: f64,
    /// Slots spent delivering this hop.
    pub delay: u64,
    /// Delay of the same hop under the virtual-interferer augmentation,
    /// filled by paired runs.
    pub delay_enhanced: Option<u64>,
}
