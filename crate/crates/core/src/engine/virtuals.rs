//! Virtual interferers for the stationarized traversal: a backward chain of
//! hop-law points trailing the start, and Poisson refills of the void sector
//! cleared by each completed hop. Virtual nodes transmit like real ones but
//! are never selected as relays, so the packet's path is untouched; they only
//! raise the interference.

use rand::rngs::SmallRng;
use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::error::Result;
use crate::protocol::{ConeChoiceModel, PowerControlPolicy};
use crate::spatial::{ConePartition, Point};

use super::world::World;

/// One virtual interferer. Its policy parameters are recomputed at the start
/// of each hop from the union of real and currently live virtual points.
#[derive(Debug, Clone)]
pub struct VirtualNode {
    pub position: Point,
    /// Stable stream identity: `generation << 32 | index`. Generation 0 is
    /// the backward chain; generation `i + 1` is the refill of hop `i`.
    pub id: u64,
    uniform: bool,
    /// Candidate cones and their (power, prob); a single entry under the
    /// worst-case model, one per non-empty cone under the uniform model.
    cones: Vec<u8>,
    powers: Vec<f64>,
    probs: Vec<f64>,
}

impl VirtualNode {
    pub fn new(position: Point, generation: u64, index: u64) -> Self {
        Self {
            position,
            id: (generation << 32) | index,
            uniform: true,
            cones: Vec::new(),
            powers: Vec::new(),
            probs: Vec::new(),
        }
    }

    #[inline]
    pub(crate) fn rate(&self, rng: &mut SmallRng) -> (f64, f64) {
        if self.cones.is_empty() {
            return (0.0, 0.0);
        }
        let i = if self.uniform { rng.gen_range(0..self.cones.len()) } else { 0 };
        (self.powers[i], self.probs[i])
    }
}

/// Draw one `(R, theta)` pair from the hop law: `R` with the cone
/// nearest-neighbor density, `theta` uniform on `(-phi, phi)`.
pub fn sample_hop_law(
    intensity: f64,
    partition: &ConePartition,
    rng: &mut impl Rng,
) -> (f64, f64) {
    let rate = intensity * std::f64::consts::PI / partition.count() as f64;
    let exp = Exp::new(rate).expect("positive rate");
    let r = exp.sample(rng).sqrt();
    let phi = partition.half_angle();
    let theta = rng.gen_range(-phi..phi);
    (r, theta)
}

/// Backward chain anchored at `origin`: positions `X_{-1}, X_{-2}, ...` with
/// i.i.d. hop-law displacements, each next point sitting in the previous
/// point's forward cone. Truncated once the chain has receded `depth` behind
/// the origin, where the neglected tail is below the windowing tolerance.
pub fn backward_chain(
    intensity: f64,
    partition: &ConePartition,
    origin: Point,
    depth: f64,
    rng: &mut impl Rng,
) -> Vec<Point> {
    let mut chain = Vec::new();
    let mut head = origin;
    while origin.x - head.x <= depth {
        let (r, theta) = sample_hop_law(intensity, partition, rng);
        head = Point::new(head.x - r * theta.cos(), head.y - r * theta.sin());
        chain.push(head);
    }
    chain
}

/// Poisson refill of the void sector `(source + C_1) ∩ B(source, radius)`
/// cleared by a completed hop: count Poisson with mean `lambda * phi * R^2`,
/// positions uniform on the sector.
pub fn refill_void(
    intensity: f64,
    partition: &ConePartition,
    source: Point,
    radius: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Point>> {
    let phi = partition.half_angle();
    let mean = intensity * phi * radius * radius;
    if mean <= 0.0 {
        return Ok(Vec::new());
    }
    let count = Poisson::new(mean)
        .map_err(|e| crate::error::SimError::Parameter(format!("refill mean {mean}: {e}")))?
        .sample(rng) as usize;
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let r = radius * rng.gen::<f64>().sqrt();
        let t = rng.gen_range(-phi..phi);
        points.push(Point::new(source.x + r * t.cos(), source.y + r * t.sin()));
    }
    Ok(points)
}

/// Recomputes every virtual node's per-cone policy table over the union of
/// the real points and the live virtual points.
pub(crate) fn rebuild_tables(
    virtuals: &mut [VirtualNode],
    world: &World,
    policy: &PowerControlPolicy,
) -> Result<()> {
    let partition = world.partition;
    let m = partition.count();
    let alpha = world.params.alpha;
    let positions: Vec<(u64, Point)> = virtuals.iter().map(|v| (v.id, v.position)).collect();
    for v in virtuals.iter_mut() {
        let mut per_cone: Vec<f64> = vec![0.0; m];
        for k in 0..m {
            if let Some((_, d)) =
                world.grid.nearest_in_cone(&world.points, v.position, None, k, &partition)
            {
                per_cone[k] = d;
            }
        }
        for &(id, p) in &positions {
            if id == v.id || p == v.position {
                continue;
            }
            if let Ok(k) = partition.cone_index(v.position, p) {
                let d = v.position.distance(p);
                if per_cone[k] == 0.0 || d < per_cone[k] {
                    per_cone[k] = d;
                }
            }
        }
        v.cones.clear();
        v.powers.clear();
        v.probs.clear();
        match world.params.cone_mode {
            ConeChoiceModel::UniformRandom => {
                v.uniform = true;
                for (k, &d) in per_cone.iter().enumerate() {
                    if d > 0.0 {
                        let (power, prob) = policy.power_and_prob(d, alpha)?;
                        v.cones.push(k as u8);
                        v.powers.push(power);
                        v.probs.push(prob);
                    }
                }
            }
            ConeChoiceModel::WorstCase => {
                v.uniform = false;
                let mut best: Option<(usize, f64)> = None;
                for (k, &d) in per_cone.iter().enumerate() {
                    if d > 0.0 && best.map_or(true, |(_, bd)| d < bd) {
                        best = Some((k, d));
                    }
                }
                if let Some((k, d)) = best {
                    let (power, prob) = policy.power_and_prob(d, alpha)?;
                    v.cones.push(k as u8);
                    v.powers.push(power);
                    v.probs.push(prob);
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngTree;

    #[test]
    fn hop_law_moments() {
        let part = ConePartition::new(6).unwrap();
        let mut rng = RngTree::new(51).stream(&[0]);
        let n = 200_000;
        let (mut sum_r2, mut sum_theta) = (0.0, 0.0);
        for _ in 0..n {
            let (r, theta) = sample_hop_law(1.0, &part, &mut rng);
            sum_r2 += r * r;
            sum_theta += theta;
            assert!(theta.abs() < part.half_angle());
        }
        // E[R^2] = m / (lambda pi)
        let m_over = 6.0 / std::f64::consts::PI;
        assert!((sum_r2 / n as f64 - m_over).abs() / m_over < 0.02);
        assert!((sum_theta / n as f64).abs() < 0.01);
    }

    #[test]
    fn refill_count_is_poisson_with_sector_mean() {
        let part = ConePartition::new(6).unwrap();
        let mut rng = RngTree::new(52).stream(&[0]);
        let (lambda, radius) = (1.0, 2.5);
        let mean = lambda * part.half_angle() * radius * radius;
        let n = 20_000;
        let counts: Vec<f64> = (0..n)
            .map(|_| {
                refill_void(lambda, &part, Point::new(0.0, 0.0), radius, &mut rng)
                    .unwrap()
                    .len() as f64
            })
            .collect();
        let m_hat = counts.iter().sum::<f64>() / n as f64;
        let v_hat =
            counts.iter().map(|c| (c - m_hat) * (c - m_hat)).sum::<f64>() / (n - 1) as f64;
        assert!((m_hat - mean).abs() / mean < 0.03, "mean {m_hat} vs {mean}");
        assert!((v_hat - mean).abs() / mean < 0.06, "var {v_hat} vs {mean}");
    }

    #[test]
    fn refill_points_stay_in_the_sector() {
        let part = ConePartition::new(6).unwrap();
        let mut rng = RngTree::new(53).stream(&[0]);
        let source = Point::new(3.0, -1.0);
        let radius = 4.0;
        for _ in 0..200 {
            for p in refill_void(1.0, &part, source, radius, &mut rng).unwrap() {
                assert!(source.distance(p) <= radius + 1e-12);
                assert_eq!(part.cone_index(source, p).unwrap(), 0);
            }
        }
    }

    #[test]
    fn backward_chain_recedes_and_respects_cones() {
        let part = ConePartition::new(6).unwrap();
        let mut rng = RngTree::new(54).stream(&[0]);
        let origin = Point::new(20.0, 0.0);
        for _ in 0..50 {
            let chain = backward_chain(1.0, &part, origin, 20.0, &mut rng);
            assert!(!chain.is_empty());
            // each earlier point sees its successor in its forward cone
            let mut next = origin;
            for &p in &chain {
                assert_eq!(part.cone_index(p, next).unwrap(), 0);
                assert!(p.x < next.x);
                next = p;
            }
            let last = chain.last().unwrap();
            assert!(origin.x - last.x > 20.0);
        }
    }
}
