//! Per-replication state: the point realization, its spatial index, and the
//! per-node policy tables derived from cone nearest-neighbor distances.

use rand::rngs::SmallRng;
use rand::Rng;

use crate::error::{Result, SimError};
use crate::protocol::{ConeChoiceModel, Policy};
use crate::spatial::{ConePartition, PointSet, SpatialGrid};

use super::{PolicyKind, SimParams};

/// Flattened per-node lists of non-empty cone indices.
#[derive(Debug, Clone)]
pub(crate) struct NonEmptyLists {
    offsets: Vec<u32>,
    cones: Vec<u8>,
}

impl NonEmptyLists {
    #[inline]
    pub(crate) fn of(&self, node: usize) -> &[u8] {
        &self.cones[self.offsets[node] as usize..self.offsets[node + 1] as usize]
    }
}

/// Power and transmit probability lookup for every node, shaped by the
/// policy and the cone-choice model.
#[derive(Debug, Clone)]
pub(crate) enum Tables {
    /// Fixed power and probability for everyone.
    Aloha { power: f64, prob: f64 },
    /// Power control with a fresh uniform cone draw per node per slot;
    /// `powers`/`probs` are `n x m`, zero for empty cones.
    Uniform { powers: Vec<f64>, probs: Vec<f64>, lists: NonEmptyLists },
    /// Power control with every node pinned to its worst-case cone, the one
    /// holding its overall nearest neighbor.
    Worst { powers: Vec<f64>, probs: Vec<f64> },
}

impl Tables {
    /// The (power, prob) a node uses this slot. Draws the cone when the model
    /// says so; silent nodes report a zero probability.
    #[inline]
    pub(crate) fn rate(&self, node: usize, m: usize, rng: &mut SmallRng) -> (f64, f64) {
        match self {
            Tables::Aloha { power, prob } => (*power, *prob),
            Tables::Worst { powers, probs } => (powers[node], probs[node]),
            Tables::Uniform { powers, probs, lists } => {
                let cones = lists.of(node);
                if cones.is_empty() {
                    return (0.0, 0.0);
                }
                let k = cones[rng.gen_range(0..cones.len())] as usize;
                (powers[node * m + k], probs[node * m + k])
            }
        }
    }
}

/// A point realization with everything precomputed that stays fixed over a
/// replication: the spatial index and the per-node policy tables.
#[derive(Debug, Clone)]
pub struct World {
    pub params: SimParams,
    pub partition: ConePartition,
    pub points: PointSet,
    pub grid: SpatialGrid,
    pub tagged: usize,
    pub(crate) tables: Tables,
}

impl World {
    pub fn build(params: &SimParams, points: PointSet) -> Result<Self> {
        let tagged = points
            .tagged_index
            .ok_or_else(|| SimError::Parameter("world needs a tagged (Palm) point".into()))?;
        let partition = params.partition()?;
        let grid = SpatialGrid::build(&points, &partition);
        let tables = match params.policy()? {
            Policy::Aloha(a) => Tables::Aloha { power: a.power, prob: a.prob },
            Policy::PowerControl(policy) => {
                let n = points.len();
                let m = partition.count();
                let mut cone_dist = vec![0.0f64; n * m];
                for node in 0..n {
                    for k in 0..m {
                        if let Some((_, d)) =
                            grid.nearest_in_cone(&points, points.points[node], Some(node), k, &partition)
                        {
                            cone_dist[node * m + k] = d;
                        }
                    }
                }
                match params.cone_mode {
                    ConeChoiceModel::UniformRandom => {
                        let mut powers = vec![0.0f64; n * m];
                        let mut probs = vec![0.0f64; n * m];
                        let mut offsets = Vec::with_capacity(n + 1);
                        let mut cones = Vec::new();
                        offsets.push(0u32);
                        for node in 0..n {
                            for k in 0..m {
                                let d = cone_dist[node * m + k];
                                if d > 0.0 {
                                    let (power, prob) = policy.power_and_prob(d, params.alpha)?;
                                    powers[node * m + k] = power;
                                    probs[node * m + k] = prob;
                                    cones.push(k as u8);
                                }
                            }
                            offsets.push(cones.len() as u32);
                        }
                        Tables::Uniform { powers, probs, lists: NonEmptyLists { offsets, cones } }
                    }
                    ConeChoiceModel::WorstCase => {
                        let mut powers = vec![0.0f64; n];
                        let mut probs = vec![0.0f64; n];
                        for node in 0..n {
                            let mut best: Option<f64> = None;
                            for k in 0..m {
                                let d = cone_dist[node * m + k];
                                if d > 0.0 && best.map_or(true, |b| d < b) {
                                    best = Some(d);
                                }
                            }
                            if let Some(d) = best {
                                let (power, prob) = policy.power_and_prob(d, params.alpha)?;
                                powers[node] = power;
                                probs[node] = prob;
                            }
                        }
                        Tables::Worst { powers, probs }
                    }
                }
            }
        };
        Ok(Self { params: *params, partition, points, grid, tagged, tables })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest neighbor of `node` in its translated cone `k`.
    pub fn nearest_in_cone(&self, node: usize, k: usize) -> Option<(usize, f64)> {
        self.grid
            .nearest_in_cone(&self.points, self.points.points[node], Some(node), k, &self.partition)
    }

    /// Frozen link of the tagged node: its cone-0 nearest neighbor and the
    /// power/probability it keeps until the packet leaves.
    pub fn tagged_link(&self) -> Result<TaggedLink> {
        let (receiver, distance) =
            self.nearest_in_cone(self.tagged, 0).ok_or(SimError::EmptyCone)?;
        let (power, prob) = match self.params.policy()? {
            Policy::PowerControl(p) => p.power_and_prob(distance, self.params.alpha)?,
            Policy::Aloha(a) => (a.power, a.prob),
        };
        Ok(TaggedLink { receiver, distance, power, prob })
    }

    pub(crate) fn is_power_control(&self) -> bool {
        self.params.policy == PolicyKind::PowerControl
    }
}

/// The tagged node's frozen transmission parameters toward its receiver.
#[derive(Debug, Clone, Copy)]
pub struct TaggedLink {
    pub receiver: usize,
    pub distance: f64,
    pub power: f64,
    pub prob: f64,
}
