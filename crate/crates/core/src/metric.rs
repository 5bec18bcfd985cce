//! Finite metric measure spaces, separated nets and doubling estimates.
//!
//! A [`PointCloud`] is a finite set of points `0..n` with a distance oracle.
//! Balls are open, `B(x, r) = {y : d(x, y) < r}`, unless a function says
//! otherwise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// How distances are derived from coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    /// `|x - y|` on the real line (one coordinate).
    Line,
    /// `min(|x - y|, 1 - |x - y|)` per coordinate on the unit torus.
    Torus,
    /// Euclidean distance, or an explicit distance matrix.
    General,
}

#[derive(Debug, Clone)]
enum Oracle {
    Coordinates { dim: usize, coords: Vec<f64> },
    Matrix(Vec<f64>),
}

/// A finite metric space on the point ids `0..n`.
#[derive(Debug, Clone)]
pub struct PointCloud {
    n: usize,
    topology: Topology,
    oracle: Oracle,
}

impl PointCloud {
    /// Points on the real line.
    pub fn line(xs: Vec<f64>) -> Result<Self> {
        Self::from_coordinates(1, xs, Topology::Line)
    }

    /// Points on the unit circle `[0, 1)` with the wrap-around metric.
    pub fn torus(xs: Vec<f64>) -> Result<Self> {
        Self::from_coordinates(1, xs, Topology::Torus)
    }

    /// The uniform grid `{k/n : k = 0..n}` on the line.
    pub fn line_grid(n: usize) -> Self {
        Self::line((0..n).map(|k| k as f64 / n as f64).collect()).expect("grid coordinates are finite")
    }

    /// The uniform grid `{k/n : k = 0..n}` on the unit torus.
    pub fn torus_grid(n: usize) -> Self {
        Self::torus((0..n).map(|k| k as f64 / n as f64).collect()).expect("grid coordinates are finite")
    }

    /// Points in `R^dim` with the Euclidean metric.
    pub fn euclidean(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(1, Vec::len);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::from_coordinates(dim, coords, Topology::General)
    }

    /// Flat row-major coordinates with an explicit topology.
    pub fn from_coordinates(dim: usize, coords: Vec<f64>, topology: Topology) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("coordinate dimension must be positive"));
        }
        if coords.len() % dim != 0 {
            return Err(invalid("coordinate count is not a multiple of the dimension"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(invalid("coordinates must be finite"));
        }
        if topology == Topology::Line && dim != 1 {
            return Err(invalid("line topology needs one coordinate per point"));
        }
        Ok(Self {
            n: coords.len() / dim,
            topology,
            oracle: Oracle::Coordinates { dim, coords },
        })
    }

    /// An explicit distance matrix. Symmetry, zero diagonal and the triangle
    /// inequality are checked.
    pub fn from_matrix(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut flat = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::InvalidMetric(format!(
                    "distance matrix row has {} entries, expected {n}",
                    row.len()
                )));
            }
            flat.extend_from_slice(row);
        }
        let cloud = Self { n, topology: Topology::General, oracle: Oracle::Matrix(flat) };
        cloud.check_metric(0)?;
        Ok(cloud)
    }

    /// `n` points drawn uniformly from the unit cube `[0, 1]^dim`.
    pub fn random_uniform(n: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coords = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        Self::from_coordinates(dim.max(1), coords, Topology::General).expect("random coordinates are valid")
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    /// Coordinate dimension, or `None` for matrix-backed clouds.
    pub fn dim(&self) -> Option<usize> {
        match &self.oracle {
            Oracle::Coordinates { dim, .. } => Some(*dim),
            Oracle::Matrix(_) => None,
        }
    }

    pub fn coordinates(&self, i: usize) -> Option<&[f64]> {
        match &self.oracle {
            Oracle::Coordinates { dim, coords } => Some(&coords[i * dim..(i + 1) * dim]),
            Oracle::Matrix(_) => None,
        }
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.oracle {
            Oracle::Matrix(m) => m[i * self.n + j],
            Oracle::Coordinates { dim, coords } => {
                let (a, b) = (&coords[i * dim..(i + 1) * dim], &coords[j * dim..(j + 1) * dim]);
                match self.topology {
                    Topology::Line => (a[0] - b[0]).abs(),
                    Topology::Torus => {
                        if *dim == 1 {
                            torus_gap(a[0], b[0])
                        } else {
                            a.iter().zip(b).map(|(x, y)| torus_gap(*x, *y).powi(2)).sum::<f64>().sqrt()
                        }
                    }
                    Topology::General => {
                        if *dim == 1 {
                            (a[0] - b[0]).abs()
                        } else {
                            a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
                        }
                    }
                }
            }
        }
    }

    /// Ids of the open ball `B(center, r)`, ascending.
    pub fn ball(&self, center: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| self.dist(center, y) < r).collect()
    }

    /// Ids of the closed ball `{y : d(center, y) <= r}`, ascending.
    pub fn closed_ball(&self, center: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&y| self.dist(center, y) <= r).collect()
    }

    /// `min_{a in set} d(x, a)`, `+inf` for an empty set.
    pub fn dist_to_set(&self, x: usize, set: &[usize]) -> f64 {
        set.iter().map(|&a| self.dist(x, a)).fold(f64::INFINITY, f64::min)
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                best = best.max(self.dist(i, j));
            }
        }
        best
    }

    /// Smallest positive pairwise distance, `+inf` when there is none.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let d = self.dist(i, j);
                if d > 0.0 {
                    best = best.min(d);
                }
            }
        }
        best
    }

    /// Checks the metric axioms: every pair for symmetry and the diagonal,
    /// every triple when `n <= 64`, otherwise 10^4 seeded random triples.
    pub fn check_metric(&self, seed: u64) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            if self.dist(i, i) != 0.0 {
                return Err(Error::InvalidMetric(format!("d({i}, {i}) = {} != 0", self.dist(i, i))));
            }
            for j in 0..n {
                let d = self.dist(i, j);
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::InvalidMetric(format!("d({i}, {j}) = {d} is not a nonnegative real")));
                }
                if d != self.dist(j, i) {
                    return Err(Error::InvalidMetric(format!("d({i}, {j}) != d({j}, {i})")));
                }
            }
        }
        let check = |i: usize, j: usize, k: usize| -> Result<()> {
            let lhs = self.dist(i, k);
            let rhs = self.dist(i, j) + self.dist(j, k);
            if lhs > rhs + 1e-12 * rhs.max(1.0) {
                return Err(Error::InvalidMetric(format!(
                    "triangle inequality fails: d({i}, {k}) = {lhs} > d({i}, {j}) + d({j}, {k}) = {rhs}"
                )));
            }
            Ok(())
        };
        if n <= 64 {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        check(i, j, k)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..10_000 {
                check(rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n))?;
            }
        }
        Ok(())
    }
}

fn torus_gap(x: f64, y: f64) -> f64 {
    let g = (x - y).abs().rem_euclid(1.0);
    g.min(1.0 - g)
}

/// `delta^k` for a possibly negative level `k`.
#[inline]
pub fn scale(delta: f64, k: i32) -> f64 {
    delta.powi(k)
}

/// Positive point masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measure {
    weights: Vec<f64>,
}

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(invalid(format!("point masses must be positive and finite, got {w}")));
        }
        Ok(Self { weights })
    }

    /// Total mass one, spread evenly.
    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    /// Unit mass at every point.
    pub fn counting(n: usize) -> Self {
        Self { weights: vec![1.0; n] }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.weights[i]).sum()
    }

    /// Largest `mu(B(x, 2r)) / mu(B(x, r))` over data centers `x` and radii
    /// `r` realized as distances from `x`.
    pub fn doubling_ratio(&self, cloud: &PointCloud) -> f64 {
        let n = cloud.len();
        let mut worst = 1.0f64;
        for x in 0..n {
            let mut dists: Vec<f64> = (0..n).map(|y| cloud.dist(x, y)).filter(|d| *d > 0.0).collect();
            dists.sort_by(f64::total_cmp);
            dists.dedup();
            for r in dists {
                let (mut inner, mut outer) = (0.0, 0.0);
                for y in 0..n {
                    let d = cloud.dist(x, y);
                    if d < r {
                        inner += self.weights[y];
                    }
                    if d < 2.0 * r {
                        outer += self.weights[y];
                    }
                }
                worst = worst.max(outer / inner);
            }
        }
        worst
    }
}

/// A set of point ids with pairwise distances at least `separation`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparatedSet {
    /// Member ids, ascending.
    pub members: Vec<usize>,
    pub separation: f64,
    /// Every cloud point is within `separation` of a member.
    pub maximal: bool,
}

impl SeparatedSet {
    pub fn contains(&self, id: usize) -> bool {
        self.members.binary_search(&id).is_ok()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

fn check_order(order: Option<&[usize]>, n: usize) -> Result<Vec<usize>> {
    match order {
        None => Ok((0..n).collect()),
        Some(o) => {
            let mut seen = vec![false; n];
            if o.len() != n {
                return Err(invalid(format!("order has {} entries for {n} points", o.len())));
            }
            for &i in o {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(invalid("order is not a permutation of the point ids"));
                }
            }
            Ok(o.to_vec())
        }
    }
}

/// Scans `order` and keeps every point at distance `>= delta` from all points
/// kept so far, starting from `forced`.
fn greedy_extend(cloud: &PointCloud, delta: f64, forced: &[usize], order: &[usize]) -> Vec<usize> {
    let mut kept = forced.to_vec();
    let mut in_set = vec![false; cloud.len()];
    for &f in forced {
        in_set[f] = true;
    }
    for &x in order {
        if in_set[x] {
            continue;
        }
        if kept.iter().all(|&a| cloud.dist(x, a) >= delta) {
            kept.push(x);
            in_set[x] = true;
        }
    }
    kept.sort_unstable();
    kept
}

/// Greedy maximal `delta`-separated subset of the cloud, scanning points in
/// `order` (ascending id when `None`).
pub fn greedy_maximal_separated(cloud: &PointCloud, delta: f64, order: Option<&[usize]>) -> Result<SeparatedSet> {
    if !(delta > 0.0) {
        return Err(invalid(format!("separation must be positive, got {delta}")));
    }
    let order = check_order(order, cloud.len())?;
    Ok(SeparatedSet { members: greedy_extend(cloud, delta, &[], &order), separation: delta, maximal: true })
}

/// The first pair of members closer than `delta`, if any.
pub fn find_separation_violation(cloud: &PointCloud, members: &[usize], delta: f64) -> Option<(usize, usize, f64)> {
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            let d = cloud.dist(a, b);
            if d < delta {
                return Some((a, b, d));
            }
        }
    }
    None
}

/// Output of [`split_separated`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub parts: Vec<SeparatedSet>,
    /// `max_{z in Z} |Z ∩ B(z, D2)|`, which bounds the number of parts.
    pub packing_bound: usize,
}

/// Splits a `d1`-separated set into disjoint `d2`-separated sets by repeated
/// greedy maximal extraction (ascending id order).
pub fn split_separated(cloud: &PointCloud, z: &[usize], d1: f64, d2: f64) -> Result<SplitResult> {
    if !(d1 > 0.0) || !(d2 >= d1) {
        return Err(invalid(format!("need D2 >= D1 > 0, got D1 = {d1}, D2 = {d2}")));
    }
    let mut remaining = z.to_vec();
    remaining.sort_unstable();
    remaining.dedup();
    if let Some((a, b, distance)) = find_separation_violation(cloud, &remaining, d1) {
        return Err(Error::NotSeparated { separation: d1, a, b, distance });
    }
    let packing_bound = remaining
        .iter()
        .map(|&x| remaining.iter().filter(|&&y| cloud.dist(x, y) < d2).count())
        .max()
        .unwrap_or(0);
    let mut parts = Vec::new();
    while !remaining.is_empty() {
        let mut part: Vec<usize> = Vec::new();
        let mut rest = Vec::new();
        for &x in &remaining {
            if part.iter().all(|&a| cloud.dist(x, a) >= d2) {
                part.push(x);
            } else {
                rest.push(x);
            }
        }
        parts.push(SeparatedSet { members: part, separation: d2, maximal: false });
        remaining = rest;
    }
    Ok(SplitResult { parts, packing_bound })
}

/// Maximal nested `delta^k`-separated sets `A_k ⊆ A_{k+1}` for
/// `k = k_min..=k_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestedNets {
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    levels: Vec<SeparatedSet>,
}

impl NestedNets {
    /// Wraps precomputed levels after checking separation, maximality and
    /// nesting against the cloud.
    pub fn from_levels(cloud: &PointCloud, delta: f64, k_min: i32, levels: Vec<Vec<usize>>) -> Result<Self> {
        check_delta(delta)?;
        if levels.is_empty() {
            return Err(invalid("nets need at least one level"));
        }
        let k_max = k_min + levels.len() as i32 - 1;
        let levels = levels
            .into_iter()
            .enumerate()
            .map(|(i, mut members)| {
                members.sort_unstable();
                members.dedup();
                SeparatedSet { members, separation: scale(delta, k_min + i as i32), maximal: true }
            })
            .collect();
        let nets = Self { delta, k_min, k_max, levels };
        let report = nets.verify(cloud);
        if let Some((level, next, point)) = report.nesting_violation {
            return Err(Error::NotNested { level, next, point });
        }
        if let Some((a, b, distance, separation)) = report.separation_violation {
            return Err(Error::NotSeparated { separation, a, b, distance });
        }
        if let Some((level, point)) = report.maximality_violation {
            return Err(invalid(format!("level {level} is not maximal: point {point} is uncovered")));
        }
        Ok(nets)
    }

    pub fn level(&self, k: i32) -> Option<&SeparatedSet> {
        if k < self.k_min || k > self.k_max {
            return None;
        }
        self.levels.get((k - self.k_min) as usize)
    }

    pub fn levels(&self) -> impl Iterator<Item = (i32, &SeparatedSet)> {
        self.levels.iter().enumerate().map(move |(i, s)| (self.k_min + i as i32, s))
    }

    /// Brute-force check of separation, maximality and nesting.
    pub fn verify(&self, cloud: &PointCloud) -> NetsReport {
        let mut report = NetsReport::default();
        for (k, set) in self.levels() {
            let sep = scale(self.delta, k);
            if report.separation_violation.is_none() {
                if let Some((a, b, d)) = find_separation_violation(cloud, &set.members, sep) {
                    report.separation_violation = Some((a, b, d, sep));
                }
            }
            if report.maximality_violation.is_none() {
                if let Some(x) = (0..cloud.len()).find(|&x| cloud.dist_to_set(x, &set.members) >= sep) {
                    report.maximality_violation = Some((k, x));
                }
            }
            if let Some(next) = self.level(k + 1) {
                if report.nesting_violation.is_none() {
                    if let Some(&p) = set.members.iter().find(|&&p| !next.contains(p)) {
                        report.nesting_violation = Some((k, k + 1, p));
                    }
                }
            }
        }
        report
    }

    /// Nets as JSON: `{"delta", "k_min", "k_max", "levels": [[ids], ...]}`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "delta": self.delta,
            "k_min": self.k_min,
            "k_max": self.k_max,
            "levels": self.levels.iter().map(|s| s.members.clone()).collect::<Vec<_>>(),
        })
    }
}

/// First violation found of each net invariant, if any.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NetsReport {
    /// `(a, b, distance, separation)`
    pub separation_violation: Option<(usize, usize, f64, f64)>,
    /// `(level, uncovered point)`
    pub maximality_violation: Option<(i32, usize)>,
    /// `(level, next level, missing point)`
    pub nesting_violation: Option<(i32, i32, usize)>,
}

impl NetsReport {
    pub fn passed(&self) -> bool {
        self.separation_violation.is_none() && self.maximality_violation.is_none() && self.nesting_violation.is_none()
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Builds `A_{k_min}` greedily, then each `A_{k+1}` greedily with `A_k` as
/// forced members.
pub fn build_nested_nets(
    cloud: &PointCloud,
    delta: f64,
    k_min: i32,
    k_max: i32,
    order: Option<&[usize]>,
) -> Result<NestedNets> {
    check_delta(delta)?;
    if k_min > k_max {
        return Err(invalid(format!("k_min = {k_min} exceeds k_max = {k_max}")));
    }
    let order = check_order(order, cloud.len())?;
    let mut levels: Vec<SeparatedSet> = Vec::with_capacity((k_max - k_min + 1) as usize);
    let mut forced: Vec<usize> = Vec::new();
    for k in k_min..=k_max {
        let sep = scale(delta, k);
        let members = greedy_extend(cloud, sep, &forced, &order);
        forced = members.clone();
        levels.push(SeparatedSet { members, separation: sep, maximal: true });
    }
    Ok(NestedNets { delta, k_min, k_max, levels })
}

/// A level range for a cloud: `k_min` is the largest level whose scale
/// exceeds the diameter (so the top level is one cube) and `k_max` the
/// smallest level whose scale is at most the minimum separation (so the
/// bottom level is all points).
pub fn default_level_range(cloud: &PointCloud, delta: f64) -> Result<(i32, i32)> {
    check_delta(delta)?;
    let diam = cloud.diameter();
    let sep = cloud.min_separation();
    let mut k_min = 0i32;
    if diam > 0.0 {
        k_min = (diam.ln() / delta.ln()).ceil() as i32;
        while scale(delta, k_min) <= diam {
            k_min -= 1;
        }
        while scale(delta, k_min + 1) > diam {
            k_min += 1;
        }
    }
    let mut k_max = k_min;
    if sep.is_finite() {
        while scale(delta, k_max) > sep {
            k_max += 1;
        }
    }
    Ok((k_min, k_max))
}

/// Points within `eps` of the boundary of `a`, on either side.
pub fn boundary_layer(cloud: &PointCloud, a: &[usize], eps: f64) -> Vec<usize> {
    let mut inside = vec![false; cloud.len()];
    for &x in a {
        inside[x] = true;
    }
    let complement: Vec<usize> = (0..cloud.len()).filter(|&x| !inside[x]).collect();
    let a_set: Vec<usize> = (0..cloud.len()).filter(|&x| inside[x]).collect();
    (0..cloud.len())
        .filter(|&x| {
            let other = if inside[x] { &complement } else { &a_set };
            cloud.dist_to_set(x, other) < eps
        })
        .collect()
}

/// Result of [`estimate_doubling_constant`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DoublingEstimate {
    pub m: usize,
    pub balls_checked: usize,
    pub balls_total: usize,
    pub exhaustive: bool,
    /// Balls whose cover was computed greedily (an upper bound) because the
    /// ball held more than 128 points.
    pub greedy_covers: usize,
}

const EXHAUSTIVE_LIMIT: usize = 128;
const SAMPLED_BALLS: usize = 2_000;

/// Smallest `M` such that every closed ball `{d(x, y) <= r}` with `x` a data
/// point and `r` a realized distance from `x` is covered by `M` closed
/// data-centered balls of radius `r / 2`. Exhaustive for `n <= 128`,
/// otherwise a seeded sample of balls.
pub fn estimate_doubling_constant(cloud: &PointCloud, seed: u64) -> DoublingEstimate {
    let n = cloud.len();
    let mut balls: Vec<(usize, f64)> = Vec::new();
    for x in 0..n {
        let mut dists: Vec<f64> = (0..n).map(|y| cloud.dist(x, y)).filter(|d| *d > 0.0).collect();
        dists.sort_by(f64::total_cmp);
        dists.dedup();
        balls.extend(dists.into_iter().map(|r| (x, r)));
    }
    let balls_total = balls.len();
    let exhaustive = n <= EXHAUSTIVE_LIMIT;
    if !exhaustive && balls.len() > SAMPLED_BALLS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        balls.shuffle(&mut rng);
        balls.truncate(SAMPLED_BALLS);
    }
    let mut m = 1;
    let mut greedy_covers = 0;
    for &(x, r) in &balls {
        let ball = cloud.closed_ball(x, r);
        let (cover, exact) = min_cover(cloud, &ball, r / 2.0);
        if !exact {
            greedy_covers += 1;
        }
        m = m.max(cover);
    }
    DoublingEstimate { m, balls_checked: balls.len(), balls_total, exhaustive, greedy_covers }
}

type Bits = Vec<u64>;

fn bits_with(len: usize, idx: impl Iterator<Item = usize>) -> Bits {
    let mut b = vec![0u64; len.div_ceil(64)];
    for i in idx {
        b[i / 64] |= 1 << (i % 64);
    }
    b
}

/// Minimum number of closed `radius`-balls centered at cloud points needed
/// to cover `targets`. Returns `(count, exact)`.
fn min_cover(cloud: &PointCloud, targets: &[usize], radius: f64) -> (usize, bool) {
    let t = targets.len();
    if t <= 1 {
        return (t, true);
    }
    let mut sets: Vec<Bits> = (0..cloud.len())
        .map(|c| bits_with(t, (0..t).filter(|&i| cloud.dist(c, targets[i]) <= radius)))
        .filter(|b| b.iter().any(|w| *w != 0))
        .collect();
    sets.sort();
    sets.dedup();
    // drop sets contained in another
    let keep: Vec<bool> = (0..sets.len())
        .map(|i| {
            !(0..sets.len()).any(|j| {
                j != i
                    && sets[i].iter().zip(&sets[j]).all(|(a, b)| a & !b == 0)
                    && (sets[i] != sets[j])
            })
        })
        .collect();
    let sets: Vec<Bits> = sets.into_iter().zip(keep).filter(|(_, k)| *k).map(|(s, _)| s).collect();
    let full = bits_with(t, 0..t);
    let greedy = greedy_cover(&sets, &full);
    if t > EXHAUSTIVE_LIMIT {
        return (greedy, false);
    }
    let mut best = greedy;
    let covered = vec![0u64; full.len()];
    branch_cover(&sets, &full, covered, 0, &mut best);
    (best, true)
}

fn greedy_cover(sets: &[Bits], full: &Bits) -> usize {
    let mut covered = vec![0u64; full.len()];
    let mut count = 0;
    while covered != *full {
        let best = sets
            .iter()
            .max_by_key(|s| s.iter().zip(&covered).map(|(a, c)| (a & !c).count_ones()).sum::<u32>())
            .expect("every target is covered by its own ball");
        for (c, a) in covered.iter_mut().zip(best) {
            *c |= a;
        }
        count += 1;
    }
    count
}

fn branch_cover(sets: &[Bits], full: &Bits, covered: Bits, used: usize, best: &mut usize) {
    if covered == *full {
        *best = (*best).min(used);
        return;
    }
    if used + 1 >= *best {
        return;
    }
    // branch on the uncovered element with the fewest covering sets
    let mut pick: Option<(usize, usize)> = None;
    for (w, (f, c)) in full.iter().zip(&covered).enumerate() {
        let mut free = f & !c;
        while free != 0 {
            let bit = free.trailing_zeros() as usize;
            free &= free - 1;
            let count = sets.iter().filter(|s| s[w] >> bit & 1 == 1).count();
            if pick.map_or(true, |(_, best_count)| count < best_count) {
                pick = Some((w * 64 + bit, count));
            }
        }
    }
    let (elem, _) = pick.expect("uncovered element exists");
    let (w, bit) = (elem / 64, elem % 64);
    for s in sets.iter().filter(|s| s[w] >> bit & 1 == 1) {
        let next: Bits = covered.iter().zip(s).map(|(c, a)| c | a).collect();
        branch_cover(sets, full, next, used + 1, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line16() -> PointCloud {
        PointCloud::line_grid(16)
    }

    #[test]
    fn doubling_trivial_cases() {
        let one = PointCloud::line(vec![0.3]).unwrap();
        assert_eq!(estimate_doubling_constant(&one, 0).m, 1);
        let two = PointCloud::line(vec![0.0, 1.0]).unwrap();
        assert_eq!(estimate_doubling_constant(&two, 0).m, 2);
    }

    #[test]
    fn greedy_examples() {
        let c = PointCloud::line(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(greedy_maximal_separated(&c, 1.5, None).unwrap().members, vec![0, 2]);
        let all = greedy_maximal_separated(&c, 1.0, None).unwrap();
        assert_eq!(all.members, vec![0, 1, 2, 3]);
        let g = greedy_maximal_separated(&line16(), 0.25, None).unwrap();
        assert_eq!(g.members, vec![0, 4, 8, 12]);
    }

    #[test]
    fn greedy_respects_order() {
        let c = PointCloud::line(vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let s = greedy_maximal_separated(&c, 1.5, Some(&[1, 0, 2, 3])).unwrap();
        assert_eq!(s.members, vec![1, 3]);
        assert!(greedy_maximal_separated(&c, 1.5, Some(&[1, 1, 2, 3])).is_err());
        assert!(greedy_maximal_separated(&c, 0.0, None).is_err());
    }

    #[test]
    fn split_examples() {
        let c = PointCloud::line((0..6).map(f64::from).collect()).unwrap();
        let z: Vec<usize> = (0..6).collect();
        let s = split_separated(&c, &z, 1.0, 2.0).unwrap();
        let parts: Vec<_> = s.parts.iter().map(|p| p.members.clone()).collect();
        assert_eq!(parts, vec![vec![0, 2, 4], vec![1, 3, 5]]);

        let same = split_separated(&c, &z, 1.0, 1.0).unwrap();
        assert_eq!(same.parts.len(), 1);
        assert_eq!(same.parts[0].members, z);

        let s3 = split_separated(&c, &[0, 1, 2], 1.0, 3.0).unwrap();
        assert_eq!(s3.parts.len(), 3);
        assert!(s3.parts.len() <= s3.packing_bound);
    }

    #[test]
    fn split_rejects_bad_input() {
        let c = PointCloud::line(vec![0.0, 0.5, 2.0]).unwrap();
        assert!(matches!(split_separated(&c, &[0, 1, 2], 1.0, 2.0), Err(Error::NotSeparated { .. })));
        assert!(split_separated(&c, &[0, 2], 2.0, 1.0).is_err());
    }

    #[test]
    fn nets_on_line16() {
        let nets = build_nested_nets(&line16(), 0.5, 0, 4, None).unwrap();
        assert_eq!(nets.level(0).unwrap().members, vec![0]);
        assert_eq!(nets.level(1).unwrap().members, vec![0, 8]);
        assert_eq!(nets.level(2).unwrap().members, vec![0, 4, 8, 12]);
        assert_eq!(nets.level(3).unwrap().members, vec![0, 2, 4, 6, 8, 10, 12, 14]);
        assert_eq!(nets.level(4).unwrap().members, (0..16).collect::<Vec<_>>());
        assert!(nets.verify(&line16()).passed());
    }

    #[test]
    fn nets_degenerate_cases() {
        let one = PointCloud::line(vec![0.7]).unwrap();
        let nets = build_nested_nets(&one, 0.5, -2, 3, None).unwrap();
        assert!(nets.levels().all(|(_, s)| s.members == vec![0]));

        let c = PointCloud::random_uniform(30, 2, 4);
        let nets = build_nested_nets(&c, 0.3, 2, 2, None).unwrap();
        let g = greedy_maximal_separated(&c, 0.3f64.powi(2), None).unwrap();
        assert_eq!(nets.level(2).unwrap().members, g.members);

        assert!(build_nested_nets(&c, 1.0, 0, 1, None).is_err());
        assert!(build_nested_nets(&c, 0.0, 0, 1, None).is_err());
        assert!(build_nested_nets(&c, 0.5, 2, 1, None).is_err());
    }

    #[test]
    fn from_levels_rejects_broken_nesting() {
        let c = line16();
        let err = NestedNets::from_levels(&c, 0.5, 0, vec![vec![0], vec![4, 12]]);
        assert!(matches!(err, Err(Error::NotNested { .. })));
    }

    #[test]
    fn boundary_layer_examples() {
        let torus = PointCloud::torus_grid(16);
        let all: Vec<usize> = (0..16).collect();
        assert!(boundary_layer(&torus, &all, 0.5).is_empty());
        assert!(boundary_layer(&torus, &[], 0.5).is_empty());
        let half: Vec<usize> = (0..8).collect();
        assert_eq!(boundary_layer(&torus, &half, 0.125), vec![0, 7, 8, 15]);
        assert!(boundary_layer(&torus, &half, 1.0 / 16.0).is_empty());
    }

    #[test]
    fn matrix_cloud_validation() {
        let ok = PointCloud::from_matrix(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(ok.dist(0, 1), 1.0);
        assert!(PointCloud::from_matrix(&[vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
        let bad_triangle = [vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        assert!(PointCloud::from_matrix(&bad_triangle).is_err());
    }

    #[test]
    fn level_range_for_torus() {
        let (k_min, k_max) = default_level_range(&PointCloud::torus_grid(16), 0.5).unwrap();
        assert_eq!((k_min, k_max), (0, 4));
        let (k_min, _) = default_level_range(&PointCloud::random_uniform(20, 2, 1), 0.5).unwrap();
        assert_eq!(k_min, -1);
    }

    #[test]
    fn measure_basics() {
        assert!(Measure::new(vec![1.0, 0.0]).is_err());
        let mu = Measure::counting(16);
        assert_eq!(mu.mass(&[1, 2, 3]), 3.0);
        let ratio = mu.doubling_ratio(&line16());
        assert!(ratio >= 1.0 && ratio <= 3.0, "{ratio}");
    }
}
