//! Exit-time experiments: palm-condition a realization at the window center,
//! freeze the tagged node's link toward its forward-cone nearest neighbor,
//! and run contention until the first successful delivery.

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::analysis;
use crate::error::{Result, SimError};
use crate::rng::{purpose, RngTree};
use crate::spatial::{palm_condition, sample_ppp, Point};

use super::contention::{contend, HopResult, HopSpec};
use super::world::World;
use super::SimParams;

/// One exit-time sample.
#[derive(Debug, Clone, Copy)]
pub struct ExitOutcome {
    pub replication: u64,
    /// Fingerprint of the point realization's stream, for output files.
    pub phi_fingerprint: u64,
    /// First success slot, or the horizon when censored.
    pub delay: u64,
    pub censored: bool,
    /// Distance to the frozen receiver.
    pub nn_distance: f64,
}

fn build_world(params: &SimParams, tree: &RngTree, replication: u64) -> Result<World> {
    let window = params.centered_window()?;
    let mut rng = tree.stream(&[purpose::POINTS, replication]);
    let base = sample_ppp(params.intensity, window, &mut rng)?;
    let points = palm_condition(&base, Point::new(0.0, 0.0))?;
    World::build(params, points)
}

/// Runs one replication: fresh realization, fresh fading and MAC draws.
pub fn run_exit_time(params: &SimParams, tree: &RngTree, replication: u64) -> Result<ExitOutcome> {
    let world = build_world(params, tree, replication)?;
    let link = world.tagged_link()?;
    let spec = HopSpec {
        world: &world,
        virtuals: &[],
        source: world.tagged,
        receiver: link.receiver,
        src_power: link.power,
        src_prob: link.prob,
    };
    let outcome = contend(&spec, tree, replication, 0, params.horizon)?;
    Ok(ExitOutcome {
        replication,
        phi_fingerprint: tree.fingerprint(&[purpose::POINTS, replication]),
        delay: outcome.slots,
        censored: outcome.censored,
        nn_distance: link.distance,
    })
}

/// Replays the contention on one fixed realization with independent fading
/// and MAC draws per replay, capping each replay at `cap` slots. Used for the
/// conditional survival curve `P[T > k | Phi]`.
pub fn run_exit_time_replays(
    params: &SimParams,
    tree: &RngTree,
    phi_replication: u64,
    replays: u64,
    cap: u64,
) -> Result<Vec<HopResult>> {
    let world = build_world(params, tree, phi_replication)?;
    let link = world.tagged_link()?;
    let spec = HopSpec {
        world: &world,
        virtuals: &[],
        source: world.tagged,
        receiver: link.receiver,
        src_power: link.power,
        src_prob: link.prob,
    };
    (0..replays)
        .map(|replay| contend(&spec, tree, phi_replication, replay, cap))
        .collect()
}

/// The geometric-tail constant of one fixed realization, paired with its
/// receiver distance: `(J, nn_distance)`.
pub fn j_bound_for_replication(
    params: &SimParams,
    tree: &RngTree,
    phi_replication: u64,
) -> Result<(f64, f64)> {
    let world = build_world(params, tree, phi_replication)?;
    let link = world.tagged_link()?;
    let receiver = world.points.points[link.receiver];
    let j = analysis::j_bound(&world.points, receiver, params)?;
    Ok((j, link.distance))
}

/// Monte Carlo of the conditional Laplace transform `E[exp(-a I*) | Phi]`
/// under worst-case cone choices, against its product lower bound.
#[derive(Debug, Clone, Copy)]
pub struct LaplaceMc {
    pub mc_mean: f64,
    pub mc_se: f64,
    pub product_bound: f64,
}

pub fn worst_case_laplace_mc(
    params: &SimParams,
    tree: &RngTree,
    replication: u64,
    draws: u64,
) -> Result<LaplaceMc> {
    let mut forced = *params;
    forced.cone_mode = crate::protocol::ConeChoiceModel::WorstCase;
    forced.policy = super::PolicyKind::PowerControl;
    let world = build_world(&forced, tree, replication)?;
    let link = world.tagged_link()?;
    let receiver_pos = world.points.points[link.receiver];
    let inputs = analysis::BoundInputs::from_params(&forced);
    if !(inputs.c1 < 1.0) {
        return Err(SimError::Condition(format!("worst-case Laplace needs c1 < 1, got {}", inputs.c1)));
    }

    let (powers, probs) = match &world.tables {
        super::world::Tables::Worst { powers, probs } => (powers, probs),
        _ => unreachable!("worst-case tables were forced above"),
    };
    let n = world.len();
    let mut loss = vec![0.0f64; n];
    for (z, &p) in world.points.points.iter().enumerate() {
        if z == world.tagged || z == link.receiver {
            continue;
        }
        loss[z] = crate::channel::path_loss(p.distance(receiver_pos), forced.alpha)?;
    }

    let exp = Exp::new(forced.mu).expect("validated fading rate");
    let mut rng = tree.stream(&[purpose::DIAGNOSTICS, replication]);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let mut interference = 0.0;
        for z in 0..n {
            if z == world.tagged || z == link.receiver {
                continue;
            }
            if probs[z] > 0.0 && rng.gen::<f64>() < probs[z] {
                interference += powers[z] * exp.sample(&mut rng) * loss[z];
            }
        }
        let value = (-inputs.a * interference).exp();
        sum += value;
        sum_sq += value * value;
    }
    let mean = sum / draws as f64;
    let var = (sum_sq / draws as f64 - mean * mean).max(0.0);
    let bound = analysis::laplace_lower_bound(&world.points, receiver_pos, inputs.c1, forced.alpha)?;
    Ok(LaplaceMc { mc_mean: mean, mc_se: (var / draws as f64).sqrt(), product_bound: bound })
}
