//! Splitting the cubes of a dyadic system into sparse families.
//!
//! Given a level-preserving injection `τ` on cubes with `τ(Q) ⊆ m B_Q`, the
//! cubes are split into families labelled `(i, j, ω)` such that in every
//! family the hosts `P_Q ⊇ B_Q`, `P_{τQ} ⊇ B_{τQ}` taken from system `ω`
//! are pairwise disjoint on each level, and the coarser host
//! `P^*_Q ⊇ 2m B_Q` of a cube sits inside the hosts of its family ancestors.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::adjacent::{host_pair_for_cubes, AdjacentFamily, HostPairOutcome};
use crate::cubes::{CubeId, DyadicSystem};
use crate::error::{invalid, Error, Result};
use crate::metric::{check_delta, scale, split_separated, Measure, PointCloud};

/// Smallest `T >= 1` with `2 m δ^T <= 1`.
pub fn compute_t(m: f64, delta: f64) -> Result<u32> {
    check_delta(delta)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid(format!("dilation must be positive and finite, got {m}")));
    }
    let mut t = 1u32;
    while 2.0 * m * scale(delta, t as i32) > 1.0 {
        t += 1;
    }
    Ok(t)
}

/// A level-preserving injection on the cubes of one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauMap {
    k_min: i32,
    /// `images[k - k_min][q]` is the index of `τ(Q)` within level `k`.
    images: Vec<Vec<usize>>,
    dilation: f64,
    c_tau: f64,
}

impl TauMap {
    /// Validates shape and injectivity against `system`.
    pub fn new(system: &DyadicSystem, images: Vec<Vec<usize>>, dilation: f64, c_tau: f64) -> Result<Self> {
        if !(dilation >= 1.0 && dilation.is_finite()) {
            return Err(Error::InvalidTau(format!("dilation must be >= 1, got {dilation}")));
        }
        if !(c_tau >= 1.0 && c_tau.is_finite()) {
            return Err(Error::InvalidTau(format!("measure constant must be >= 1, got {c_tau}")));
        }
        let depth = (system.k_max() - system.k_min() + 1) as usize;
        if images.len() != depth {
            return Err(Error::InvalidTau(format!("{} levels given for a system with {depth}", images.len())));
        }
        for ((k, cubes), img) in system.levels().zip(&images) {
            if img.len() != cubes.len() {
                return Err(Error::InvalidTau(format!("level {k} has {} images for {} cubes", img.len(), cubes.len())));
            }
            let mut hit = vec![false; cubes.len()];
            for &j in img {
                if j >= cubes.len() {
                    return Err(Error::InvalidTau(format!("image index {j} out of range on level {k}")));
                }
                if std::mem::replace(&mut hit[j], true) {
                    return Err(Error::InvalidTau(format!("two cubes of level {k} map to index {j}")));
                }
            }
        }
        Ok(Self { k_min: system.k_min(), images, dilation, c_tau })
    }

    pub fn identity(system: &DyadicSystem) -> Self {
        let images = system.levels().map(|(_, c)| (0..c.len()).collect()).collect();
        Self { k_min: system.k_min(), images, dilation: 1.0, c_tau: 1.0 }
    }

    pub fn dilation(&self) -> f64 {
        self.dilation
    }

    pub fn c_tau(&self) -> f64 {
        self.c_tau
    }

    pub fn apply(&self, q: CubeId) -> Result<CubeId> {
        let li = q.level - self.k_min;
        let img = usize::try_from(li).ok().and_then(|li| self.images.get(li)).ok_or(Error::UnknownCube(q))?;
        Ok(CubeId::new(q.level, *img.get(q.index).ok_or(Error::UnknownCube(q))?))
    }

    /// Inverse map; `τ` is a bijection on each finite level.
    pub fn inverse(&self) -> TauMap {
        let images = self
            .images
            .iter()
            .map(|img| {
                let mut inv = vec![0; img.len()];
                for (i, &j) in img.iter().enumerate() {
                    inv[j] = i;
                }
                inv
            })
            .collect();
        TauMap { k_min: self.k_min, images, dilation: self.dilation, c_tau: self.c_tau }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().all(|img| img.iter().enumerate().all(|(i, &j)| i == j))
    }

    /// Checks `τ(Q) ⊆ m B_Q` and `μ(Q) <= c_τ μ(τQ) <= c_τ² μ(Q)` on every cube.
    pub fn verify_admissible(&self, system: &DyadicSystem, cloud: &PointCloud, mu: &Measure) -> TauReport {
        let mut report = TauReport { local: true, measure: true, max_mass_ratio: 1.0, worst_local: None };
        for q in system.cubes() {
            let Ok(t) = self.apply(q.id()) else {
                report.local = false;
                continue;
            };
            let image = system.cube(t).expect("image on the same level");
            let r = self.dilation * system.ball_radius(q.level);
            if image.members.iter().any(|&y| cloud.dist(q.center, y) >= r) {
                report.local = false;
                report.worst_local.get_or_insert(q.id());
            }
            let (a, b) = (mu.mass(&q.members), mu.mass(&image.members));
            let ratio = (a / b).max(b / a);
            report.max_mass_ratio = report.max_mass_ratio.max(ratio);
            let tol = 1.0 + 1e-12;
            if a > self.c_tau * b * tol || b > self.c_tau * a * tol {
                report.measure = false;
            }
        }
        report
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TauReport {
    pub local: bool,
    pub measure: bool,
    pub max_mass_ratio: f64,
    pub worst_local: Option<CubeId>,
}

impl TauReport {
    pub fn passed(&self) -> bool {
        self.local && self.measure
    }
}

/// Assignment of every cube to one of `L` collections; within a collection
/// the enlarged balls `3δ^{-3} B_R`, `R ∈ {Q, τQ}`, of distinct same-level
/// cubes meet no common point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectionPartition {
    k_min: i32,
    collection: Vec<Vec<usize>>,
    count: usize,
}

impl CollectionPartition {
    /// Number of collections `L`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn collection_of(&self, q: CubeId) -> Result<usize> {
        usize::try_from(q.level - self.k_min)
            .ok()
            .and_then(|li| self.collection.get(li))
            .and_then(|c| c.get(q.index))
            .copied()
            .ok_or(Error::UnknownCube(q))
    }

    /// Cubes of collection `i`, coarse levels first.
    pub fn members(&self, i: usize) -> Vec<CubeId> {
        let mut out = Vec::new();
        for (li, level) in self.collection.iter().enumerate() {
            for (q, &c) in level.iter().enumerate() {
                if c == i {
                    out.push(CubeId::new(self.k_min + li as i32, q));
                }
            }
        }
        out
    }
}

/// Bitsets of the cloud points in `B(center, r)` for every cube of a level.
struct LevelBalls {
    words: usize,
    bits: Vec<u64>,
}

impl LevelBalls {
    fn new(cloud: &PointCloud, centers: &[usize], r: f64) -> Self {
        let words = cloud.len().div_ceil(64);
        let mut bits = vec![0u64; words * centers.len()];
        for (q, &c) in centers.iter().enumerate() {
            for y in 0..cloud.len() {
                if cloud.dist(c, y) < r {
                    bits[q * words + y / 64] |= 1 << (y % 64);
                }
            }
        }
        Self { words, bits }
    }

    fn meet(&self, a: usize, b: usize) -> bool {
        let (x, y) = (&self.bits[a * self.words..(a + 1) * self.words], &self.bits[b * self.words..(b + 1) * self.words]);
        x.iter().zip(y).any(|(u, v)| u & v != 0)
    }
}

/// Repeated greedy extraction of conflict-free groups, scanning `items` in
/// the given order.
fn split_by_conflict(items: &[usize], conflict: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut remaining = items.to_vec();
    let mut groups = Vec::new();
    while !remaining.is_empty() {
        let mut group: Vec<usize> = Vec::new();
        let mut rest = Vec::new();
        for &x in &remaining {
            if group.iter().all(|&g| !conflict(x, g)) {
                group.push(x);
            } else {
                rest.push(x);
            }
        }
        groups.push(group);
        remaining = rest;
    }
    groups
}

/// Three-step splitting of every level: centers are split into
/// `12δ^{k-3}`-separated groups, then each group is split until no two
/// cubes `Q ≠ P` have meeting enlarged balls among `Q, P, τQ, τP`.
pub fn partition_collections(system: &DyadicSystem, cloud: &PointCloud, tau: &TauMap) -> Result<CollectionPartition> {
    if cloud.len() != system.n_points() {
        return Err(Error::DimensionMismatch { expected: system.n_points(), got: cloud.len() });
    }
    let delta = system.delta();
    let mut collection = Vec::new();
    let mut count = 0;
    for (k, cubes) in system.levels() {
        let centers: Vec<usize> = cubes.iter().map(|c| c.center).collect();
        let by_center: HashMap<usize, usize> = centers.iter().enumerate().map(|(q, &c)| (c, q)).collect();
        let img: Vec<usize> = (0..cubes.len()).map(|q| tau.apply(CubeId::new(k, q)).map(|t| t.index)).collect::<Result<_>>()?;
        let balls = LevelBalls::new(cloud, &centers, 3.0 * scale(delta, -3) * system.ball_radius(k));
        let step1 = split_separated(cloud, &centers, system.side(k), 12.0 * scale(delta, k - 3))?;
        let mut groups = Vec::new();
        for part in &step1.parts {
            let ids: Vec<usize> = part.members.iter().map(|c| by_center[c]).collect();
            let cross = |q: usize, p: usize| {
                balls.meet(q, p) || (q != img[p] && balls.meet(q, img[p])) || (p != img[q] && balls.meet(p, img[q]))
            };
            for g in split_by_conflict(&ids, cross) {
                groups.extend(split_by_conflict(&g, |q, p| balls.meet(img[q], img[p])));
            }
        }
        let mut level = vec![0; cubes.len()];
        for (i, g) in groups.iter().enumerate() {
            for &q in g {
                level[q] = i;
            }
        }
        count = count.max(groups.len());
        collection.push(level);
    }
    Ok(CollectionPartition { k_min: system.k_min(), collection, count })
}

/// Family label: collection `i`, level class `j = lev mod 4T`, system `ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    pub i: usize,
    pub j: u32,
    pub omega: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostedCube {
    pub cube: CubeId,
    pub p: CubeId,
    pub p_tau: CubeId,
    pub p_star: CubeId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    pub label: Label,
    pub cubes: Vec<HostedCube>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// The hosts would sit above the coarsest level of the family.
    LevelUnderflow,
    /// No system hosts both enlarged balls.
    NoHost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub cube: CubeId,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseDecomposition {
    pub t: u32,
    pub systems: usize,
    pub collections: usize,
    pub families: Vec<SparseFamily>,
    pub exclusions: Vec<Exclusion>,
}

impl SparseDecomposition {
    /// `4 T K L`, the number of labels available.
    pub fn count_bound(&self) -> usize {
        4 * self.t as usize * self.systems * self.collections
    }

    pub fn labeled_cubes(&self) -> usize {
        self.families.iter().map(|f| f.cubes.len()).sum()
    }

    /// Mass of the excluded cubes on each level that has any.
    pub fn excluded_mass_by_level(&self, system: &DyadicSystem, mu: &Measure) -> Result<BTreeMap<i32, f64>> {
        let mut out = BTreeMap::new();
        for e in &self.exclusions {
            *out.entry(e.cube.level).or_insert(0.0) += mu.mass(&system.cube(e.cube)?.members);
        }
        Ok(out)
    }
}

/// The smallest `ω` hosting both `B_R` and `B_{τR}` with ancestor depth `T`,
/// as a ball-level search over the family.
pub fn gamma(
    r: CubeId,
    system: &DyadicSystem,
    family: &AdjacentFamily,
    cloud: &PointCloud,
    tau: &TauMap,
    slack: f64,
) -> Result<crate::adjacent::HostOutcome> {
    let t = compute_t(tau.dilation(), system.delta())?;
    let (a, b) = (system.cube(r)?, system.cube(tau.apply(r)?)?);
    let radius = system.ball_radius(r.level);
    let balls = [crate::adjacent::Ball::new(a.center, radius), crate::adjacent::Ball::new(b.center, radius)];
    crate::adjacent::find_host(family, cloud, &balls, t, slack)
}

/// Labels every cube of `system` by its collection, level class and the
/// smallest system of `family` hosting the pair `(Q, τQ)`; unhostable cubes
/// are reported as exclusions.
pub fn build_sparse_decomposition(
    system: &DyadicSystem,
    family: &AdjacentFamily,
    cloud: &PointCloud,
    tau: &TauMap,
) -> Result<SparseDecomposition> {
    if (family.delta() - system.delta()).abs() > 1e-15 {
        return Err(invalid("system and family use different δ"));
    }
    let t = compute_t(tau.dilation(), system.delta())?;
    let partition = partition_collections(system, cloud, tau)?;
    let mut families: BTreeMap<Label, Vec<HostedCube>> = BTreeMap::new();
    let mut exclusions = Vec::new();
    for q in system.cubes() {
        let id = q.id();
        let k = q.level;
        if k - 3 - (t as i32) < family.k_min() || k - 3 > family.k_max() {
            exclusions.push(Exclusion { cube: id, reason: ExclusionReason::LevelUnderflow });
            continue;
        }
        match host_pair_for_cubes(family, cloud, system, id, tau.apply(id)?, tau.dilation())? {
            HostPairOutcome::Found(h) => {
                let label = Label { i: partition.collection_of(id)?, j: k.rem_euclid(4 * t as i32) as u32, omega: h.omega };
                families.entry(label).or_default().push(HostedCube { cube: id, p: h.p1, p_tau: h.p2, p_star: h.pstar });
            }
            HostPairOutcome::NotFound { .. } => exclusions.push(Exclusion { cube: id, reason: ExclusionReason::NoHost }),
        }
    }
    Ok(SparseDecomposition {
        t,
        systems: family.len(),
        collections: partition.count(),
        families: families.into_iter().map(|(label, cubes)| SparseFamily { label, cubes }).collect(),
        exclusions,
    })
}

/// Exhaustive check of a decomposition against member sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecompositionReport {
    /// Every cube is labelled or excluded exactly once.
    pub disjoint_union: bool,
    /// `Q ⊆ P_Q`, `τQ ⊆ P_{τQ}` and `P_Q ∪ P_{τQ} ∪ 2mB_Q ⊆ P^*_Q`.
    pub containment: bool,
    /// Same-level cubes of a family have disjoint `P_Q ∪ P_{τQ}`.
    pub separation: bool,
    /// `P^*_{Q_1} ⊆ P_{Q_2}` whenever `Q_2` is a strict family ancestor of `Q_1`.
    pub nesting: bool,
    /// Levels inside a family agree modulo `4T`.
    pub level_gap: bool,
    pub families: usize,
    pub count_bound: usize,
    /// Same-level pairs inside families that were compared.
    pub same_level_pairs: usize,
    /// Family ancestor pairs that were compared.
    pub nested_pairs: usize,
}

impl DecompositionReport {
    pub fn passed(&self) -> bool {
        self.disjoint_union && self.containment && self.separation && self.nesting && self.level_gap && self.families <= self.count_bound
    }
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

pub fn verify_decomposition(
    system: &DyadicSystem,
    family: &AdjacentFamily,
    cloud: &PointCloud,
    tau: &TauMap,
    dec: &SparseDecomposition,
) -> Result<DecompositionReport> {
    let mut report = DecompositionReport {
        disjoint_union: true,
        containment: true,
        separation: true,
        nesting: true,
        level_gap: true,
        families: dec.families.len(),
        count_bound: dec.count_bound(),
        same_level_pairs: 0,
        nested_pairs: 0,
    };
    let mut seen: HashMap<CubeId, usize> = HashMap::new();
    for id in dec.families.iter().flat_map(|f| f.cubes.iter().map(|h| h.cube)).chain(dec.exclusions.iter().map(|e| e.cube)) {
        *seen.entry(id).or_default() += 1;
    }
    if seen.len() != system.cube_count() || seen.values().any(|&c| c != 1) || system.cubes().any(|c| !seen.contains_key(&c.id())) {
        report.disjoint_union = false;
    }
    let m = tau.dilation();
    let period = 4 * dec.t as i32;
    for f in &dec.families {
        let host = family
            .system(f.label.omega)
            .ok_or_else(|| invalid(format!("label refers to missing system {}", f.label.omega)))?;
        let mut by_level: BTreeMap<i32, Vec<&HostedCube>> = BTreeMap::new();
        for h in &f.cubes {
            by_level.entry(h.cube.level).or_default().push(h);
            if h.cube.level.rem_euclid(period) as u32 != f.label.j {
                report.level_gap = false;
            }
            let q = system.cube(h.cube)?;
            let tq = system.cube(tau.apply(h.cube)?)?;
            let (p, pt, ps) = (host.cube(h.p)?, host.cube(h.p_tau)?, host.cube(h.p_star)?);
            let wide = cloud.ball(q.center, 2.0 * m * system.ball_radius(q.level));
            if !(is_subset(&q.members, &p.members)
                && is_subset(&tq.members, &pt.members)
                && is_subset(&p.members, &ps.members)
                && is_subset(&pt.members, &ps.members)
                && wide.iter().all(|&y| ps.contains(y)))
            {
                report.containment = false;
            }
        }
        // same-level separation: each point claimed by at most one cube
        for hs in by_level.values() {
            report.same_level_pairs += hs.len() * (hs.len() - 1) / 2;
            let mut claim = vec![usize::MAX; cloud.len()];
            for (idx, h) in hs.iter().enumerate() {
                for id in [h.p, h.p_tau] {
                    for &y in &host.cube(id)?.members {
                        if claim[y] != usize::MAX && claim[y] != idx {
                            report.separation = false;
                        }
                        claim[y] = idx;
                    }
                }
            }
        }
        let index: HashMap<CubeId, &HostedCube> = f.cubes.iter().map(|h| (h.cube, h)).collect();
        for h in &f.cubes {
            let star = host.cube(h.p_star)?;
            for &coarser in by_level.keys().filter(|&&l| l < h.cube.level) {
                let anc = system.ancestor(h.cube, (h.cube.level - coarser) as u32)?;
                if let Some(h2) = index.get(&anc) {
                    report.nested_pairs += 1;
                    if !is_subset(&star.members, &host.cube(h2.p)?.members) {
                        report.nesting = false;
                    }
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_values() {
        assert_eq!(compute_t(1.0, 0.5).unwrap(), 1);
        assert_eq!(compute_t(4.0, 0.5).unwrap(), 3);
        assert_eq!(compute_t(4.0, 0.25).unwrap(), 2);
        assert_eq!(compute_t(0.1, 0.5).unwrap(), 1);
        assert!(compute_t(0.0, 0.5).is_err());
        assert!(compute_t(1.0, 1.0).is_err());
        assert_eq!(compute_t(1.0, 0.6).unwrap(), 2);
    }

    #[test]
    fn tau_rejects_collisions() {
        let sys = DyadicSystem::canonical_torus(8, 2, 0, 3, 0, 1).unwrap();
        let mut images: Vec<Vec<usize>> = sys.levels().map(|(_, c)| (0..c.len()).collect()).collect();
        images[2][1] = 0;
        assert!(matches!(TauMap::new(&sys, images, 1.0, 1.0), Err(Error::InvalidTau(_))));
        let t = TauMap::identity(&sys);
        assert!(t.is_identity());
        assert_eq!(t.apply(CubeId::new(3, 5)).unwrap(), CubeId::new(3, 5));
        assert!(t.apply(CubeId::new(4, 0)).is_err());
    }

    #[test]
    fn identity_is_admissible() {
        let cloud = PointCloud::torus_grid(16);
        let sys = DyadicSystem::canonical_torus(16, 2, 0, 4, 0, 1).unwrap();
        let r = TauMap::identity(&sys).verify_admissible(&sys, &cloud, &Measure::uniform(16));
        assert!(r.passed());
        assert_eq!(r.max_mass_ratio, 1.0);
    }

    #[test]
    fn collections_on_a_small_grid() {
        // with δ = 1/2 the enlarged balls have radius 72 δ^k, so on 16
        // points every level is one conflict clique
        let cloud = PointCloud::torus_grid(16);
        let sys = DyadicSystem::canonical_torus(16, 2, 0, 4, 0, 1).unwrap();
        let part = partition_collections(&sys, &cloud, &TauMap::identity(&sys)).unwrap();
        assert_eq!(part.count(), 16);
        let mut seen = std::collections::HashSet::new();
        for q in sys.level(4) {
            assert!(seen.insert(part.collection_of(q.id()).unwrap()));
        }
    }

    #[test]
    fn subset_merge() {
        assert!(is_subset(&[1, 3], &[0, 1, 2, 3]));
        assert!(!is_subset(&[1, 4], &[0, 1, 2, 3]));
        assert!(is_subset(&[], &[0]));
    }
}
