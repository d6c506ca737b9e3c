//! Tagged-packet traversal: the packet starts at the strip entry and is
//! repeatedly delivered to the nearest neighbor in the forward cone, with a
//! full contention run per hop. The information velocity is the distance
//! covered per slot.

use rand::Rng;
use serde::Serialize;

use crate::error::{Result, SimError};
use crate::rng::{purpose, RngTree};
use crate::spatial::{palm_condition, sample_ppp, Point};

use super::contention::{contend, HopSpec};
use super::virtuals::{backward_chain, rebuild_tables, refill_void, VirtualNode};
use super::world::World;
use super::{HopRecord, PolicyKind, SimParams};

/// Why a traversal ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// The packet crossed `x = L_x - G`.
    GuardExit,
    /// The slot budget ran out mid-hop.
    Horizon,
    /// The forward cone had no neighbor inside the window (boundary
    /// artifact; excluded from velocity averages).
    DeadEnd,
}

/// The tagged packet's full history over one traversal.
#[derive(Debug, Clone)]
pub struct PacketTrace {
    pub hops: Vec<HopRecord>,
    /// Distance of the packet from its start, sampled after every slot.
    pub distance_per_slot: Vec<f64>,
    pub termination: TerminationReason,
    pub total_slots: u64,
    pub origin: Point,
    /// Whether virtual interferers were active.
    pub stationary: bool,
}

impl PacketTrace {
    pub fn total_progress(&self) -> f64 {
        self.distance_per_slot.last().copied().unwrap_or(0.0)
    }
}

/// Runs one traversal. The packet enters at `(G, 0)`, every hop goes to the
/// nearest real neighbor in the forward cone, and the run ends at guard exit,
/// horizon, or a dead end. With `stationary` set, the backward chain is laid
/// down before the first hop and every completed hop refills its void with
/// virtual interferers; the relay sequence is still determined by the real
/// points alone, so paired runs traverse the same path.
pub fn run_traversal(
    params: &SimParams,
    tree: &RngTree,
    replication: u64,
    stationary: bool,
) -> Result<PacketTrace> {
    if params.policy != PolicyKind::PowerControl {
        return Err(SimError::Parameter(
            "traversal experiments require the power-control policy".into(),
        ));
    }
    if params.window_x <= 2.0 * params.guard {
        return Err(SimError::Parameter(format!(
            "strip length {} leaves no room between the guards of width {}",
            params.window_x, params.guard
        )));
    }
    let window = params.strip_window()?;
    let start = Point::new(params.guard, 0.0);
    let mut rng_points = tree.stream(&[purpose::POINTS, replication]);
    let base = sample_ppp(params.intensity, window, &mut rng_points)?;
    let points = palm_condition(&base, start)?;
    let world = World::build(params, points)?;
    let policy = params.power_control()?;

    let mut virtuals: Vec<VirtualNode> = Vec::new();
    if stationary {
        let mut spawn = tree.stream(&[purpose::VIRTUAL_SPAWN, replication, 0]);
        for (i, p) in backward_chain(params.intensity, &world.partition, start, params.guard, &mut spawn)
            .into_iter()
            .enumerate()
        {
            virtuals.push(VirtualNode::new(p, 0, i as u64));
        }
    }

    let goal_x = window.x_max - params.guard;
    let phi = world.partition.half_angle();
    let mut current = world.tagged;
    let mut current_pos = start;
    let mut hops: Vec<HopRecord> = Vec::new();
    let mut distance_per_slot: Vec<f64> = Vec::new();
    let mut slots_used: u64 = 0;
    let mut hop_index: u64 = 0;

    let termination = loop {
        if stationary {
            let keep_behind = current_pos.x - params.guard;
            virtuals.retain(|v| v.position.x >= keep_behind);
            rebuild_tables(&mut virtuals, &world, &policy)?;
        }
        let Some((next, distance)) = world.nearest_in_cone(current, 0) else {
            break TerminationReason::DeadEnd;
        };
        let (src_power, src_prob) = policy.power_and_prob(distance, params.alpha)?;
        let remaining = params.horizon - slots_used;
        if remaining == 0 {
            break TerminationReason::Horizon;
        }
        let spec = HopSpec {
            world: &world,
            virtuals: &virtuals,
            source: current,
            receiver: next,
            src_power,
            src_prob,
        };
        let outcome = contend(&spec, tree, replication, hop_index, remaining)?;
        let held_distance = current_pos.distance(start);
        slots_used += outcome.slots;
        if outcome.censored {
            for _ in 0..outcome.slots {
                distance_per_slot.push(held_distance);
            }
            break TerminationReason::Horizon;
        }
        let next_pos = world.points.points[next];
        for _ in 0..outcome.slots - 1 {
            distance_per_slot.push(held_distance);
        }
        distance_per_slot.push(next_pos.distance(start));

        let angle = ((next_pos.y - current_pos.y) / distance).asin();
        assert!(angle.abs() <= phi, "hop angle {angle} outside the forward cone");
        assert!(next_pos.x > current_pos.x, "hop moved backward");
        hops.push(HopRecord {
            index: hops.len(),
            source: current_pos,
            dest: next_pos,
            distance,
            angle,
            delay: outcome.slots,
            delay_enhanced: None,
        });

        if stationary {
            let mut spawn = tree.stream(&[purpose::VIRTUAL_SPAWN, replication, hop_index + 1]);
            let refill =
                refill_void(params.intensity, &world.partition, current_pos, distance, &mut spawn)?;
            for (i, p) in refill.into_iter().enumerate() {
                virtuals.push(VirtualNode::new(p, hop_index + 1, i as u64));
            }
        }

        current = next;
        current_pos = next_pos;
        hop_index += 1;
        if current_pos.x > goal_x {
            break TerminationReason::GuardExit;
        }
    };

    Ok(PacketTrace {
        hops,
        distance_per_slot,
        termination,
        total_slots: slots_used,
        origin: start,
        stationary,
    })
}

/// Runs the plain and the virtual-interferer traversal on coupled streams and
/// merges the enhanced delays into the plain trace's hop records. The real
/// draws are shared, so per hop the enhanced delay dominates the plain one.
pub fn run_paired_traversal(
    params: &SimParams,
    tree: &RngTree,
    replication: u64,
) -> Result<(PacketTrace, PacketTrace)> {
    let mut plain = run_traversal(params, tree, replication, false)?;
    let enhanced = run_traversal(params, tree, replication, true)?;
    for (hop, e) in plain.hops.iter_mut().zip(&enhanced.hops) {
        hop.delay_enhanced = Some(e.delay);
    }
    Ok((plain, enhanced))
}

/// Velocity estimate from a trace.
#[derive(Debug, Clone, Serialize)]
pub struct VelocityEstimate {
    /// `d(t_end) / t_end`.
    pub v_hat: f64,
    /// The full `d(t) / t` series for convergence diagnostics.
    pub series: Vec<f64>,
    pub total_slots: u64,
    pub final_distance: f64,
}

/// Information velocity of a finished trace: distance from the start over
/// elapsed slots, with the per-slot ratio series retained.
pub fn information_velocity(trace: &PacketTrace) -> Result<VelocityEstimate> {
    if trace.distance_per_slot.is_empty() {
        return Err(SimError::Parameter("velocity of an empty trace".into()));
    }
    let series: Vec<f64> = trace
        .distance_per_slot
        .iter()
        .enumerate()
        .map(|(i, &d)| d / (i + 1) as f64)
        .collect();
    let final_distance = trace.total_progress();
    Ok(VelocityEstimate {
        v_hat: *series.last().expect("non-empty"),
        series,
        total_slots: trace.total_slots,
        final_distance,
    })
}

/// Draws hop displacement samples `(R, theta)` by pure geometric walks over
/// fresh realizations, without running contention. Used to validate the hop
/// law and to measure progress statistics cheaply.
pub fn geometric_hop_samples(
    params: &SimParams,
    tree: &RngTree,
    first_replication: u64,
    wanted: usize,
) -> Result<Vec<(f64, f64)>> {
    let window = params.strip_window()?;
    let partition = params.partition()?;
    let goal_x = window.x_max - params.guard;
    let mut out = Vec::with_capacity(wanted);
    let mut replication = first_replication;
    while out.len() < wanted {
        let mut rng = tree.stream(&[purpose::POINTS, replication]);
        let base = sample_ppp(params.intensity, window, &mut rng)?;
        let points = palm_condition(&base, Point::new(params.guard, 0.0))?;
        let grid = crate::spatial::SpatialGrid::build(&points, &partition);
        let mut current = points.tagged_index.expect("palm point");
        loop {
            let cp = points.points[current];
            let Some((next, distance)) =
                grid.nearest_in_cone(&points, cp, Some(current), 0, &partition)
            else {
                break;
            };
            let np = points.points[next];
            out.push((distance, ((np.y - cp.y) / distance).asin()));
            current = next;
            if np.x > goal_x || out.len() >= wanted {
                break;
            }
        }
        replication += 1;
    }
    Ok(out)
}
