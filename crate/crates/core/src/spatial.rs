//! Point-process sampling, cone geometry, and nearest-neighbor-in-cone queries.
//!
//! Node positions are a homogeneous Poisson process restricted to a
//! rectangular window (the finite surrogate for the plane). The plane around
//! each node is partitioned into `m` equal cones; forwarding targets are the
//! nearest neighbors inside a cone. Cone intervals are half-open and
//! lower-inclusive so that every direction belongs to exactly one cone, and
//! nearest-neighbor ties break lexicographically on coordinates — both purely
//! conventions, chosen so a fixed seed reproduces bit-identical results.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// A location in the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn distance(&self, other: Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

#[inline]
fn lex_less(a: Point, b: Point) -> bool {
    (a.x, a.y) < (b.x, b.y)
}

/// Rectangular sampling window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Window {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Window {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let w = Self { x_min, x_max, y_min, y_max };
        if !(x_min < x_max && y_min < y_max)
            || !w.area().is_finite()
            || w.area() <= 0.0
        {
            return Err(SimError::Parameter(format!(
                "degenerate window [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(w)
    }

    /// Window of the given dimensions centered at the origin.
    pub fn centered(width: f64, height: f64) -> Result<Self> {
        Self::new(-width / 2.0, width / 2.0, -height / 2.0, height / 2.0)
    }

    /// Strip `[0, length] x [-height/2, height/2]` for traversal runs.
    pub fn strip(length: f64, height: f64) -> Result<Self> {
        Self::new(0.0, length, -height / 2.0, height / 2.0)
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }
}

/// A realization of node positions with an optional tagged (Palm) point.
#[derive(Debug, Clone)]
pub struct PointSet {
    pub points: Vec<Point>,
    pub intensity: f64,
    pub window: Window,
    pub tagged_index: Option<usize>,
}

impl PointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn tagged(&self) -> Option<Point> {
        self.tagged_index.map(|i| self.points[i])
    }
}

/// Samples a homogeneous Poisson process of the given intensity on `window`.
///
/// The count is Poisson with mean `intensity * area` and positions are i.i.d.
/// uniform. Coincident points (a probability-zero event) are redrawn.
pub fn sample_ppp(intensity: f64, window: Window, rng: &mut impl Rng) -> Result<PointSet> {
    if !(intensity > 0.0) || !intensity.is_finite() {
        return Err(SimError::Parameter(format!("intensity must be positive, got {intensity}")));
    }
    let mean = intensity * window.area();
    let count = Poisson::new(mean)
        .map_err(|e| SimError::Parameter(format!("poisson mean {mean}: {e}")))?
        .sample(rng) as usize;
    let mut points = Vec::with_capacity(count);
    let mut seen: HashSet<(u64, u64)> = HashSet::with_capacity(count * 2);
    while points.len() < count {
        let p = Point::new(
            rng.gen_range(window.x_min..window.x_max),
            rng.gen_range(window.y_min..window.y_max),
        );
        if seen.insert((p.x.to_bits(), p.y.to_bits())) {
            points.push(p);
        }
    }
    Ok(PointSet { points, intensity, window, tagged_index: None })
}

/// Palm-conditions a realization: inserts an atom at `location` and tags it.
/// For a Poisson process this is exactly conditioning on a point there
/// (Slivnyak), so the remaining points keep their distribution.
pub fn palm_condition(ps: &PointSet, location: Point) -> Result<PointSet> {
    if !ps.window.contains(location) {
        return Err(SimError::Parameter(format!(
            "palm location ({}, {}) outside window",
            location.x, location.y
        )));
    }
    if ps.points.iter().any(|&p| p == location) {
        return Err(SimError::Geometry("palm location collides with an existing point".into()));
    }
    let mut points = ps.points.clone();
    points.push(location);
    Ok(PointSet {
        tagged_index: Some(points.len() - 1),
        points,
        intensity: ps.intensity,
        window: ps.window,
    })
}

/// Partition of the plane into `m` equal cones of half-angle `pi/m`, cone 0
/// symmetric about the positive x-axis. `m >= 5` keeps the full cone angle
/// `2*pi/m` below `pi/2` and the half-angle below `pi/4`, which the traversal
/// construction relies on (hop sectors must not overlap).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConePartition {
    m: usize,
}

impl ConePartition {
    pub const MIN_CONES: usize = 5;

    pub fn new(m: usize) -> Result<Self> {
        if m < Self::MIN_CONES {
            return Err(SimError::Parameter(format!(
                "cone count must be at least {}, got {m}",
                Self::MIN_CONES
            )));
        }
        Ok(Self { m })
    }

    pub fn count(&self) -> usize {
        self.m
    }

    /// Half-angle of each cone.
    pub fn half_angle(&self) -> f64 {
        PI / self.m as f64
    }

    /// Direction of the axis of cone `k`.
    pub fn axis_angle(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.m as f64
    }

    /// Index of the cone, anchored at `vertex`, containing `target`.
    /// Intervals are `[axis - phi, axis + phi)`, lower-inclusive.
    pub fn cone_index(&self, vertex: Point, target: Point) -> Result<usize> {
        let dx = target.x - vertex.x;
        let dy = target.y - vertex.y;
        if dx == 0.0 && dy == 0.0 {
            return Err(SimError::DegenerateDirection);
        }
        let phi = self.half_angle();
        let mut t = dy.atan2(dx) + phi;
        if t < 0.0 {
            t += 2.0 * PI;
        }
        Ok((t / (2.0 * phi)) as usize % self.m)
    }
}

/// Nearest point of `ps` strictly inside the translated cone `x + C_k`,
/// excluding `x` itself; ties break lexicographically. Reference scan used as
/// the oracle for the grid-accelerated query.
pub fn nearest_in_cone(
    ps: &PointSet,
    x: Point,
    cone: usize,
    partition: &ConePartition,
) -> Option<(Point, f64)> {
    let mut best: Option<(Point, f64)> = None;
    for &p in &ps.points {
        if p == x {
            continue;
        }
        if partition.cone_index(x, p) != Ok(cone) {
            continue;
        }
        let d = x.distance(p);
        let better = match best {
            None => true,
            Some((bp, bd)) => d < bd || (d == bd && lex_less(p, bp)),
        };
        if better {
            best = Some((p, d));
        }
    }
    best
}

/// Uniform bucket grid over the window for nearest-in-cone queries. The cell
/// size is keyed to the expected nearest-neighbor distance in a cone,
/// `sqrt(m / (lambda * pi))`. Results are identical to the brute-force scan.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    x_min: f64,
    y_min: f64,
    cell: f64,
    nx: i64,
    ny: i64,
    starts: Vec<u32>,
    ids: Vec<u32>,
}

impl SpatialGrid {
    pub fn build(ps: &PointSet, partition: &ConePartition) -> Self {
        let w = ps.window;
        let extent = (w.x_max - w.x_min).max(w.y_max - w.y_min);
        let nn_scale = (partition.count() as f64 / (ps.intensity * PI)).sqrt();
        // keep the table bounded for very large windows or intensities
        let cell = nn_scale.max(extent / 2048.0).max(1e-9);
        let nx = (((w.x_max - w.x_min) / cell).ceil() as i64).max(1);
        let ny = (((w.y_max - w.y_min) / cell).ceil() as i64).max(1);
        let ncells = (nx * ny) as usize;

        let cell_of = |p: Point| -> usize {
            let ix = (((p.x - w.x_min) / cell) as i64).clamp(0, nx - 1);
            let iy = (((p.y - w.y_min) / cell) as i64).clamp(0, ny - 1);
            (iy * nx + ix) as usize
        };

        let mut counts = vec![0u32; ncells + 1];
        for &p in &ps.points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut cursor = starts.clone();
        let mut ids = vec![0u32; ps.points.len()];
        for (i, &p) in ps.points.iter().enumerate() {
            let c = cell_of(p);
            ids[cursor[c] as usize] = i as u32;
            cursor[c] += 1;
        }

        Self { x_min: w.x_min, y_min: w.y_min, cell, nx, ny, starts, ids }
    }

    #[inline]
    fn bucket(&self, ix: i64, iy: i64) -> &[u32] {
        let c = (iy * self.nx + ix) as usize;
        &self.ids[self.starts[c] as usize..self.starts[c + 1] as usize]
    }

    /// Nearest point of `ps` inside `origin + C_cone`, with `exclude` (if any)
    /// and points coincident with `origin` skipped. Returns the point index
    /// and its distance.
    pub fn nearest_in_cone(
        &self,
        ps: &PointSet,
        origin: Point,
        exclude: Option<usize>,
        cone: usize,
        partition: &ConePartition,
    ) -> Option<(usize, f64)> {
        let cx = ((origin.x - self.x_min) / self.cell).floor() as i64;
        let cy = ((origin.y - self.y_min) / self.cell).floor() as i64;
        let max_ring = cx
            .abs()
            .max((self.nx - 1 - cx).abs())
            .max(cy.abs())
            .max((self.ny - 1 - cy).abs());

        let mut best: Option<(usize, f64)> = None;
        let mut consider = |id: u32, best: &mut Option<(usize, f64)>| {
            if exclude == Some(id as usize) {
                return;
            }
            let p = ps.points[id as usize];
            if p == origin {
                return;
            }
            if partition.cone_index(origin, p) != Ok(cone) {
                return;
            }
            let d = origin.distance(p);
            let better = match *best {
                None => true,
                Some((bi, bd)) => d < bd || (d == bd && lex_less(p, ps.points[bi])),
            };
            if better {
                *best = Some((id as usize, d));
            }
        };

        for ring in 0..=max_ring {
            if ring == 0 {
                if cx >= 0 && cx < self.nx && cy >= 0 && cy < self.ny {
                    for &id in self.bucket(cx, cy) {
                        consider(id, &mut best);
                    }
                }
                continue;
            }
            // any point in this ring is at least (ring - 1) cells away
            let reachable = (ring - 1) as f64 * self.cell;
            if let Some((_, bd)) = best {
                if reachable > bd {
                    break;
                }
            }
            let (lo_x, hi_x) = (cx - ring, cx + ring);
            let (lo_y, hi_y) = (cy - ring, cy + ring);
            for iy in [lo_y, hi_y] {
                if iy < 0 || iy >= self.ny {
                    continue;
                }
                for ix in lo_x.max(0)..=hi_x.min(self.nx - 1) {
                    for &id in self.bucket(ix, iy) {
                        consider(id, &mut best);
                    }
                }
            }
            for ix in [lo_x, hi_x] {
                if ix < 0 || ix >= self.nx {
                    continue;
                }
                for iy in (lo_y + 1).max(0)..=(hi_y - 1).min(self.ny - 1) {
                    for &id in self.bucket(ix, iy) {
                        consider(id, &mut best);
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngTree;
    use proptest::prelude::*;

    fn tree() -> RngTree {
        RngTree::new(0x5eed)
    }

    #[test]
    fn ppp_count_mean_matches_intensity_times_area() {
        let window = Window::centered(100.0, 100.0).unwrap();
        let mut rng = tree().stream(&[1]);
        let reps = 200;
        let mean = (0..reps)
            .map(|_| sample_ppp(1.0, window, &mut rng).unwrap().len() as f64)
            .sum::<f64>()
            / reps as f64;
        // s.e. of the mean count is 100 / sqrt(reps) ~= 7.1
        assert!((mean - 10_000.0).abs() < 25.0, "mean count {mean}");
    }

    #[test]
    fn ppp_tiny_window_is_almost_always_empty() {
        let window = Window::centered(0.01, 0.01).unwrap();
        let mut rng = tree().stream(&[2]);
        let reps = 10_000;
        let zeros = (0..reps)
            .filter(|_| sample_ppp(1.0, window, &mut rng).unwrap().is_empty())
            .count();
        // P(count = 0) = exp(-1e-4) ~= 0.9999
        assert!(zeros >= reps - 10, "zeros {zeros}");
    }

    #[test]
    fn ppp_count_variance_matches_mean() {
        let window = Window::new(0.0, 50.0, 0.0, 50.0).unwrap();
        let mut rng = tree().stream(&[3]);
        let reps = 10_000;
        let counts: Vec<f64> = (0..reps)
            .map(|_| sample_ppp(2.0, window, &mut rng).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (reps - 1) as f64;
        assert!((var - 5000.0).abs() / 5000.0 < 0.05, "variance {var}");
    }

    #[test]
    fn ppp_rejects_bad_parameters() {
        let window = Window::centered(1.0, 1.0).unwrap();
        let mut rng = tree().stream(&[4]);
        assert!(sample_ppp(0.0, window, &mut rng).is_err());
        assert!(sample_ppp(-1.0, window, &mut rng).is_err());
        assert!(Window::new(1.0, 1.0, 0.0, 2.0).is_err());
        assert!(Window::new(2.0, 1.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn count_over_area_converges_to_intensity() {
        let window = Window::centered(100.0, 100.0).unwrap();
        let mut rng = tree().stream(&[5]);
        let reps = 1000;
        let total: f64 = (0..reps)
            .map(|_| sample_ppp(1.0, window, &mut rng).unwrap().len() as f64)
            .sum();
        let rate = total / (reps as f64 * window.area());
        assert!((rate - 1.0).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn palm_inserts_tagged_atom() {
        let window = Window::centered(10.0, 10.0).unwrap();
        let empty = PointSet { points: vec![], intensity: 1.0, window, tagged_index: None };
        let palmed = palm_condition(&empty, Point::new(0.0, 0.0)).unwrap();
        assert_eq!(palmed.len(), 1);
        assert_eq!(palmed.tagged(), Some(Point::new(0.0, 0.0)));

        let mut rng = tree().stream(&[6]);
        let ps = sample_ppp(1.0, window, &mut rng).unwrap();
        let n = ps.len();
        let palmed = palm_condition(&ps, Point::new(1.0, 2.0)).unwrap();
        assert_eq!(palmed.len(), n + 1);
        assert_eq!(palmed.tagged(), Some(Point::new(1.0, 2.0)));

        assert!(palm_condition(&ps, Point::new(50.0, 0.0)).is_err());
    }

    #[test]
    fn palm_leaves_other_points_uniform() {
        // Slivnyak: the non-tagged points of a palm-conditioned realization
        // are still the original process. Pool the non-tagged x-coordinates
        // and compare against the uniform CDF.
        let window = Window::centered(10.0, 10.0).unwrap();
        let mut rng = tree().stream(&[7]);
        let mut xs = Vec::new();
        for _ in 0..300 {
            let ps = sample_ppp(1.0, window, &mut rng).unwrap();
            let palmed = palm_condition(&ps, Point::new(0.5, -0.25)).unwrap();
            for (i, p) in palmed.points.iter().enumerate() {
                if Some(i) != palmed.tagged_index {
                    xs.push(p.x);
                }
            }
        }
        let ks = crate::analysis::estimators::ks_statistic(&xs, |x| {
            ((x + 5.0) / 10.0).clamp(0.0, 1.0)
        })
        .unwrap();
        assert!(ks < 0.01, "ks {ks}");
    }

    #[test]
    fn cone_index_examples() {
        let part = ConePartition::new(6).unwrap();
        let o = Point::new(0.0, 0.0);
        assert_eq!(part.cone_index(o, Point::new(5.0, 0.0)).unwrap(), 0);
        assert_eq!(part.cone_index(o, Point::new(-5.0, 1e-12)).unwrap(), 3);
        // exactly on the boundary angle pi/6: lower-inclusive puts it in cone 1
        let ang = PI / 6.0;
        assert_eq!(part.cone_index(o, Point::new(ang.cos(), ang.sin())).unwrap(), 1);
        assert!(part.cone_index(o, o).is_err());
        assert!(ConePartition::new(4).is_err());
    }

    #[test]
    fn every_direction_belongs_to_exactly_one_cone() {
        let part = ConePartition::new(7).unwrap();
        let o = Point::new(0.0, 0.0);
        let phi = part.half_angle();
        let in_cone = |k: usize, ang: f64| {
            let axis = part.axis_angle(k);
            let mut rel = (ang - axis).rem_euclid(2.0 * PI);
            if rel >= PI {
                rel -= 2.0 * PI;
            }
            (-phi..phi).contains(&rel)
        };
        for i in 0..100_000u32 {
            let ang = (i as f64 + 0.5) / 100_000.0 * 2.0 * PI - PI;
            let p = Point::new(ang.cos(), ang.sin());
            let k = part.cone_index(o, p).unwrap();
            assert!(k < part.count());
            let members = (0..part.count()).filter(|&j| in_cone(j, ang)).count();
            assert_eq!(members, 1, "angle {ang}");
            assert!(in_cone(k, ang), "angle {ang} assigned to cone {k}");
        }
    }

    #[test]
    fn nearest_in_cone_examples() {
        let window = Window::centered(10.0, 10.0).unwrap();
        let part = ConePartition::new(6).unwrap();
        let ps = PointSet {
            points: vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(3.0, 0.0)],
            intensity: 1.0,
            window,
            tagged_index: None,
        };
        let (p, d) = nearest_in_cone(&ps, Point::new(0.0, 0.0), 0, &part).unwrap();
        assert_eq!(p, Point::new(1.0, 0.0));
        assert_eq!(d, 1.0);

        let ps = PointSet {
            points: vec![Point::new(0.0, 0.0), Point::new(-1.0, 0.0)],
            intensity: 1.0,
            window,
            tagged_index: None,
        };
        assert!(nearest_in_cone(&ps, Point::new(0.0, 0.0), 0, &part).is_none());
    }

    #[test]
    fn nearest_in_cone_distance_follows_the_cone_law() {
        // CDF of the nearest-neighbor distance in one of m cones is
        // F(r) = 1 - exp(-lambda*pi*r^2/m); at r = 1, lambda = 1, m = 6 this
        // is 1 - exp(-pi/6) ~= 0.4078.
        let window = Window::centered(20.0, 20.0).unwrap();
        let part = ConePartition::new(6).unwrap();
        let mut rng = tree().stream(&[8]);
        let mut dist = Vec::with_capacity(20_000);
        while dist.len() < 20_000 {
            let ps = sample_ppp(1.0, window, &mut rng).unwrap();
            let grid = SpatialGrid::build(&ps, &part);
            if let Some((_, d)) = grid.nearest_in_cone(&ps, Point::new(0.0, 0.0), None, 0, &part) {
                dist.push(d);
            }
        }
        let cdf = |r: f64| 1.0 - (-PI * r * r / 6.0).exp();
        let ks = crate::analysis::estimators::ks_statistic(&dist, cdf).unwrap();
        assert!(ks < 0.02, "ks {ks}");
        let at_one = dist.iter().filter(|&&d| d <= 1.0).count() as f64 / dist.len() as f64;
        assert!((at_one - 0.4078).abs() < 0.015, "F(1) {at_one}");
    }

    #[test]
    fn grid_query_never_returns_origin_and_stays_in_cone() {
        let window = Window::centered(12.0, 12.0).unwrap();
        let mut rng = tree().stream(&[9]);
        for m in [5usize, 6, 9] {
            let part = ConePartition::new(m).unwrap();
            for _ in 0..50 {
                let ps = sample_ppp(1.0, window, &mut rng).unwrap();
                if ps.is_empty() {
                    continue;
                }
                let grid = SpatialGrid::build(&ps, &part);
                let origin = ps.points[0];
                for k in 0..m {
                    if let Some((idx, d)) = grid.nearest_in_cone(&ps, origin, Some(0), k, &part) {
                        assert_ne!(idx, 0);
                        assert!(d > 0.0);
                        assert_eq!(part.cone_index(origin, ps.points[idx]).unwrap(), k);
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn grid_matches_brute_force(seed in any::<u64>(), m in 5usize..10, cone in 0usize..5) {
            let window = Window::centered(8.0, 8.0).unwrap();
            let part = ConePartition::new(m).unwrap();
            let mut rng = RngTree::new(seed).stream(&[0]);
            let ps = sample_ppp(1.5, window, &mut rng).unwrap();
            let grid = SpatialGrid::build(&ps, &part);
            let origin = Point::new(
                rng.gen_range(window.x_min..window.x_max),
                rng.gen_range(window.y_min..window.y_max),
            );
            let cone = cone % m;
            let fast = grid.nearest_in_cone(&ps, origin, None, cone, &part);
            let brute = nearest_in_cone(&ps, origin, cone, &part);
            match (fast, brute) {
                (None, None) => {}
                (Some((i, d)), Some((p, bd))) => {
                    prop_assert_eq!(ps.points[i], p);
                    prop_assert_eq!(d, bd);
                }
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }
    }
}
