//! The slotted contention loop for one hop: every node draws its MAC state
//! (and, under the uniform model, a fresh destination cone), active nodes
//! contribute `power * fade * loss` at the receiver, and the hop completes at
//! the first slot where the tagged node is on, the receiver is off, and the
//! SINR clears the threshold.
//!
//! Every node consumes randomness only from its own per-hop stream, derived
//! from `(seed, replication, hop, node)`. Two runs that share the real point
//! process therefore replay identical draws on all real links, and a run with
//! extra virtual interferers can only see the per-slot interference grow;
//! that is what makes the paired enhanced delays dominate pointwise.

use rand::rngs::SmallRng;
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::channel;
use crate::error::Result;
use crate::rng::{purpose, RngTree};
use crate::spatial::Point;

use super::virtuals::VirtualNode;
use super::world::World;

/// Outcome of one hop's contention.
#[derive(Debug, Clone, Copy)]
pub struct HopResult {
    /// Slots consumed; equals the delay when not censored.
    pub slots: u64,
    pub censored: bool,
}

pub(crate) struct HopSpec<'a> {
    pub world: &'a World,
    pub virtuals: &'a [VirtualNode],
    pub source: usize,
    pub receiver: usize,
    pub src_power: f64,
    pub src_prob: f64,
}

pub(crate) fn contend(
    spec: &HopSpec<'_>,
    tree: &RngTree,
    replication: u64,
    hop: u64,
    max_slots: u64,
) -> Result<HopResult> {
    let world = spec.world;
    let params = &world.params;
    let n = world.len();
    let m = world.partition.count();
    let points = &world.points.points;
    let receiver_pos = points[spec.receiver];

    let loss_to_receiver = |p: Point| -> f64 {
        let dx = p.x - receiver_pos.x;
        let dy = p.y - receiver_pos.y;
        let r2 = dx * dx + dy * dy;
        if r2 >= 1.0 {
            r2.sqrt().powf(-params.alpha)
        } else {
            1.0
        }
    };
    let loss: Vec<f64> = points
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == spec.receiver { 0.0 } else { loss_to_receiver(p) })
        .collect();
    let vloss: Vec<f64> = spec.virtuals.iter().map(|v| loss_to_receiver(v.position)).collect();
    let loss_src = loss[spec.source];

    let mut rngs: Vec<SmallRng> = (0..n)
        .map(|z| tree.fast_stream(&[purpose::HOP, replication, hop, z as u64]))
        .collect();
    let mut vrngs: Vec<SmallRng> = spec
        .virtuals
        .iter()
        .map(|v| tree.fast_stream(&[purpose::HOP_VIRTUAL, replication, hop, v.id]))
        .collect();

    let exp = Exp::new(params.mu).expect("validated fading rate");

    for slot in 1..=max_slots {
        // real interferers first, then virtual ones: the real partial sum is
        // identical across paired runs and the virtual terms only add to it
        let mut interference = 0.0f64;
        for z in 0..n {
            if z == spec.source || z == spec.receiver {
                continue;
            }
            let rng = &mut rngs[z];
            let (power, prob) = world.tables.rate(z, m, rng);
            if prob > 0.0 && rng.gen::<f64>() < prob {
                let fade = exp.sample(rng);
                interference += power * fade * loss[z];
            }
        }
        for (vi, v) in spec.virtuals.iter().enumerate() {
            let rng = &mut vrngs[vi];
            let (power, prob) = v.rate(rng);
            if prob > 0.0 && rng.gen::<f64>() < prob {
                let fade = exp.sample(rng);
                interference += power * fade * vloss[vi];
            }
        }

        let tagged_on = rngs[spec.source].gen::<f64>() < spec.src_prob;
        let (_, receiver_prob) = world.tables.rate(spec.receiver, m, &mut rngs[spec.receiver]);
        let receiver_on = rngs[spec.receiver].gen::<f64>() < receiver_prob;

        if tagged_on && !receiver_on {
            let fade = exp.sample(&mut rngs[spec.source]);
            let sinr = channel::sinr(
                spec.src_power,
                fade,
                loss_src,
                interference,
                params.gamma,
                params.noise,
            )?;
            if sinr > params.beta {
                return Ok(HopResult { slots: slot, censored: false });
            }
        }
    }
    Ok(HopResult { slots: max_slots, censored: true })
}
