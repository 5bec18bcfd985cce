//! Finite families of dyadic systems that jointly host every ball.
//!
//! A family hosts a ball `B(x, r)` when some member system has a cube `Q`
//! containing it with `ℓ(Q) ≲ r`, and the ancestor `Q^(p)` still contains
//! the dilated ball `B(x, δ^{-p} r)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cubes::{build_dyadic_system, CubeId, DyadicSystem, SystemExport};
use crate::error::{invalid, Error, Result};
use crate::metric::{build_nested_nets, check_delta, scale, PointCloud, Topology};
use crate::sparse::compute_t;

/// How the systems of a family were generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum FamilyMode {
    /// Shifted arcs on a uniform torus grid, system `ω` shifted by `(ω - 1) / K`.
    Canonical1d,
    /// Greedy nets over seeded random point orders.
    Random { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct AdjacentFamily {
    delta: f64,
    mode: FamilyMode,
    systems: Vec<DyadicSystem>,
}

/// Builds `k` systems on the common level range `[k_min, k_max]`.
pub fn build_adjacent_family(
    cloud: &PointCloud,
    delta: f64,
    k: usize,
    mode: FamilyMode,
    k_min: i32,
    k_max: i32,
) -> Result<AdjacentFamily> {
    check_delta(delta)?;
    if k == 0 {
        return Err(invalid("a family needs at least one system"));
    }
    if k_min > k_max {
        return Err(invalid(format!("k_min = {k_min} exceeds k_max = {k_max}")));
    }
    let systems = match mode {
        FamilyMode::Canonical1d => {
            let base = torus_grid_base(cloud, delta)?;
            (0..k)
                .map(|w| DyadicSystem::canonical_torus(cloud.len(), base, k_min, k_max, w, k))
                .collect::<Result<Vec<_>>>()?
        }
        FamilyMode::Random { seed } => (0..k)
            .map(|w| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(w as u64);
                let mut order: Vec<usize> = (0..cloud.len()).collect();
                order.shuffle(&mut rng);
                let nets = build_nested_nets(cloud, delta, k_min, k_max, Some(&order))?;
                build_dyadic_system(cloud, &nets)
            })
            .collect::<Result<Vec<_>>>()?,
    };
    for (w, s) in systems.iter().enumerate() {
        let r = s.verify_axioms();
        if !(r.partition && r.nested && r.descendants && r.center_chain) {
            return Err(Error::InvalidSystem(format!("system {} fails the cube axioms: {r:?}", w + 1)));
        }
    }
    Ok(AdjacentFamily { delta, mode, systems })
}

/// `1/δ` when the cloud is the uniform torus grid `{i/n}` and `1/δ` is an
/// integer.
fn torus_grid_base(cloud: &PointCloud, delta: f64) -> Result<usize> {
    if cloud.topology() != Topology::Torus {
        return Err(Error::NotCanonical);
    }
    let n = cloud.len();
    for i in 0..n {
        let x = cloud.coordinates(i).map(|c| c[0]).unwrap_or(f64::NAN);
        if (x - i as f64 / n as f64).abs() > 1e-12 {
            return Err(Error::NotCanonical);
        }
    }
    let b = (1.0 / delta).round();
    if (b * delta - 1.0).abs() > 1e-12 || b < 2.0 {
        return Err(Error::NotCanonical);
    }
    Ok(b as usize)
}

impl AdjacentFamily {
    /// Wraps existing systems; they must share `δ`, levels and point count.
    pub fn from_systems(systems: Vec<DyadicSystem>, mode: FamilyMode) -> Result<Self> {
        let first = systems.first().ok_or_else(|| invalid("a family needs at least one system"))?;
        let (delta, k_min, k_max, n) = (first.delta(), first.k_min(), first.k_max(), first.n_points());
        if systems.iter().any(|s| s.delta() != delta || s.k_min() != k_min || s.k_max() != k_max || s.n_points() != n) {
            return Err(invalid("systems of a family must share delta, level range and point count"));
        }
        Ok(Self { delta, mode, systems })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mode(&self) -> FamilyMode {
        self.mode
    }

    /// Number of systems `K`.
    pub fn len(&self) -> usize {
        self.systems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.systems.is_empty()
    }

    pub fn k_min(&self) -> i32 {
        self.systems[0].k_min()
    }

    pub fn k_max(&self) -> i32 {
        self.systems[0].k_max()
    }

    /// System `ω`, counted from 1.
    pub fn system(&self, omega: usize) -> Option<&DyadicSystem> {
        omega.checked_sub(1).and_then(|i| self.systems.get(i))
    }

    pub fn systems(&self) -> &[DyadicSystem] {
        &self.systems
    }

    /// Whether `K <= ⌈c / δ⌉`.
    pub fn within_size_budget(&self, c: f64) -> bool {
        self.len() as f64 <= (c / self.delta).ceil()
    }

    pub fn to_export(&self) -> FamilyExport {
        FamilyExport {
            delta: self.delta,
            mode: self.mode,
            systems: self.systems.iter().map(DyadicSystem::to_export).collect(),
        }
    }

    pub fn from_export(export: &FamilyExport) -> Result<Self> {
        let systems = export.systems.iter().map(DyadicSystem::from_export).collect::<Result<Vec<_>>>()?;
        Self::from_systems(systems, export.mode)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyExport {
    pub delta: f64,
    pub mode: FamilyMode,
    pub systems: Vec<SystemExport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: usize,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: usize, radius: f64) -> Self {
        Self { center, radius }
    }
}

/// One system hosting every requested ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HostMatch {
    pub omega: usize,
    /// Hosting cube of each ball, in input order.
    pub cubes: Vec<CubeId>,
    /// The ancestor `p` levels above each hosting cube.
    pub ancestors: Vec<CubeId>,
}

/// Why a ball has no host in one system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HostFailure {
    /// No level small enough yet at least `k_min + p` contains the ball.
    NotContained,
    /// Some cube contains the ball but none of its ancestors contains the
    /// dilated ball.
    AncestorTooSmall,
    /// No admissible level exists for this radius and `p`.
    NoAdmissibleLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaDiagnostic {
    pub omega: usize,
    /// Failing balls by input position, with the reason.
    pub failures: Vec<(usize, HostFailure)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum HostOutcome {
    Found(HostMatch),
    NotFound { diagnostics: Vec<OmegaDiagnostic> },
}

impl HostOutcome {
    pub fn omega(&self) -> Option<usize> {
        match self {
            HostOutcome::Found(m) => Some(m.omega),
            HostOutcome::NotFound { .. } => None,
        }
    }

    pub fn found(&self) -> Option<&HostMatch> {
        match self {
            HostOutcome::Found(m) => Some(m),
            HostOutcome::NotFound { .. } => None,
        }
    }
}

/// Relative slack on the size comparison, absorbing rounding in `δ^k`.
const SIZE_EPS: f64 = 1e-12;

/// Finds the smallest `ω` whose system hosts every ball: a cube `Q` with
/// `B ∩ X ⊆ Q`, `ℓ(Q) <= slack · δ^{-2} · r`, and `δ^{-p}B ∩ X ⊆ Q^(p)`.
/// In each system the finest qualifying level is reported.
pub fn find_host(family: &AdjacentFamily, cloud: &PointCloud, balls: &[Ball], p: u32, slack: f64) -> Result<HostOutcome> {
    if !(slack > 0.0 && slack.is_finite()) {
        return Err(invalid(format!("slack must be positive and finite, got {slack}")));
    }
    let delta = family.delta();
    let dilation = scale(delta, -(p as i32));
    let finest = scale(delta, family.k_max());
    let mut prepared = Vec::with_capacity(balls.len());
    for b in balls {
        if b.center >= cloud.len() {
            return Err(invalid(format!("ball center {} is not a point of the cloud", b.center)));
        }
        if !(b.radius > 0.0 && b.radius.is_finite()) {
            return Err(Error::RadiusOutOfRange { radius: b.radius, reason: "radius must be positive and finite".into() });
        }
        let cap = slack * delta * delta * (1.0 + SIZE_EPS);
        if finest * delta * delta > cap * b.radius {
            return Err(Error::RadiusOutOfRange {
                radius: b.radius,
                reason: format!("below the finest scale δ^(k_max+2) / slack = {}", finest * delta * delta / slack),
            });
        }
        prepared.push((cloud.ball(b.center, b.radius), cloud.ball(b.center, dilation * b.radius)));
    }
    let mut diagnostics = Vec::new();
    for (w, system) in family.systems().iter().enumerate() {
        let mut cubes = Vec::with_capacity(balls.len());
        let mut ancestors = Vec::with_capacity(balls.len());
        let mut failures = Vec::new();
        for (bi, (b, (inner, outer))) in balls.iter().zip(&prepared).enumerate() {
            match host_in_system(system, b, inner, outer, p, slack) {
                Ok((q, a)) => {
                    cubes.push(q);
                    ancestors.push(a);
                }
                Err(f) => failures.push((bi, f)),
            }
        }
        if failures.is_empty() {
            return Ok(HostOutcome::Found(HostMatch { omega: w + 1, cubes, ancestors }));
        }
        diagnostics.push(OmegaDiagnostic { omega: w + 1, failures });
    }
    Ok(HostOutcome::NotFound { diagnostics })
}

fn host_in_system(
    system: &DyadicSystem,
    ball: &Ball,
    inner: &[usize],
    outer: &[usize],
    p: u32,
    slack: f64,
) -> std::result::Result<(CubeId, CubeId), HostFailure> {
    let delta = system.delta();
    let cap = slack * ball.radius / (delta * delta) * (1.0 + SIZE_EPS);
    let lowest = system.k_min() + p as i32;
    let mut saw_level = false;
    let mut saw_container = false;
    for k in (lowest..=system.k_max()).rev() {
        if system.side(k) > cap {
            break;
        }
        saw_level = true;
        let own = system.owners(k).expect("level in range");
        let q = own[ball.center];
        if inner.iter().any(|&y| own[y] != q) {
            continue;
        }
        saw_container = true;
        let up = system.owners(k - p as i32).expect("level in range");
        let a = up[ball.center];
        if outer.iter().all(|&y| up[y] == a) {
            return Ok((CubeId::new(k, q), CubeId::new(k - p as i32, a)));
        }
    }
    Err(if !saw_level {
        HostFailure::NoAdmissibleLevel
    } else if saw_container {
        HostFailure::AncestorTooSmall
    } else {
        HostFailure::NotContained
    })
}

/// Independent re-check of a [`HostMatch`] against cube member lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HostChecks {
    pub containment: bool,
    pub size: bool,
    pub ancestor: bool,
}

impl HostChecks {
    pub fn passed(&self) -> bool {
        self.containment && self.size && self.ancestor
    }
}

pub fn verify_host(
    family: &AdjacentFamily,
    cloud: &PointCloud,
    balls: &[Ball],
    p: u32,
    slack: f64,
    found: &HostMatch,
) -> Result<HostChecks> {
    let system = family
        .system(found.omega)
        .ok_or_else(|| invalid(format!("family has no system {}", found.omega)))?;
    if found.cubes.len() != balls.len() || found.ancestors.len() != balls.len() {
        return Err(Error::DimensionMismatch { expected: balls.len(), got: found.cubes.len() });
    }
    let delta = system.delta();
    let mut checks = HostChecks { containment: true, size: true, ancestor: true };
    for ((b, &q), &a) in balls.iter().zip(&found.cubes).zip(&found.ancestors) {
        let cube = system.cube(q)?;
        if !cloud.ball(b.center, b.radius).iter().all(|&y| cube.contains(y)) {
            checks.containment = false;
        }
        if system.side(q.level) > slack * b.radius / (delta * delta) * (1.0 + SIZE_EPS) {
            checks.size = false;
        }
        let anc = system.cube(a)?;
        let is_ancestor = a.level == q.level - p as i32 && cube.members.iter().all(|&y| anc.contains(y));
        let dilated = cloud.ball(b.center, scale(delta, -(p as i32)) * b.radius);
        if !is_ancestor || !dilated.iter().all(|&y| anc.contains(y)) {
            checks.ancestor = false;
        }
    }
    Ok(checks)
}

/// Host cubes `P_1 ⊇ B_{Q_1}`, `P_2 ⊇ B_{Q_2}` at level `k - 3` and
/// `P^* = P_1^(T) ⊇ 2m B_{Q_1}` in a single system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostPair {
    pub omega: usize,
    pub p1: CubeId,
    pub p2: CubeId,
    pub pstar: CubeId,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "outcome")]
pub enum HostPairOutcome {
    Found(HostPair),
    NotFound { diagnostics: Vec<PairDiagnostic> },
}

impl HostPairOutcome {
    pub fn found(&self) -> Option<&HostPair> {
        match self {
            HostPairOutcome::Found(h) => Some(h),
            HostPairOutcome::NotFound { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PairDiagnostic {
    pub omega: usize,
    pub first_ball: bool,
    pub second_ball: bool,
    pub dilated_ball: bool,
}

/// Searches the family for hosts of the pair `(q1, q2)` of same-level cubes
/// of `base`, with dilation `m`; `T` is derived from `m` and `δ`.
pub fn host_pair_for_cubes(
    family: &AdjacentFamily,
    cloud: &PointCloud,
    base: &DyadicSystem,
    q1: CubeId,
    q2: CubeId,
    m: f64,
) -> Result<HostPairOutcome> {
    if q1.level != q2.level {
        return Err(invalid(format!("cubes {q1:?} and {q2:?} are on different levels")));
    }
    let t = compute_t(m, family.delta())?;
    let k = q1.level;
    let host_level = k - 3;
    let top = host_level - t as i32;
    if top < family.k_min() || k > family.k_max() + 3 {
        return Err(Error::LevelOutOfRange { level: top.min(host_level), k_min: family.k_min(), k_max: family.k_max() });
    }
    let (x1, x2) = (base.cube(q1)?.center, base.cube(q2)?.center);
    let r = base.ball_radius(k);
    let (b1, b2, bm) = (cloud.ball(x1, r), cloud.ball(x2, r), cloud.ball(x1, 2.0 * m * r));
    let mut diagnostics = Vec::new();
    for (w, system) in family.systems().iter().enumerate() {
        let own = system.owners(host_level)?;
        let (p1, p2) = (own[x1], own[x2]);
        let first = b1.iter().all(|&y| own[y] == p1);
        let second = b2.iter().all(|&y| own[y] == p2);
        let up = system.owners(top)?;
        let star = up[x1];
        let dilated = bm.iter().all(|&y| up[y] == star);
        if first && second && dilated {
            return Ok(HostPairOutcome::Found(HostPair {
                omega: w + 1,
                p1: CubeId::new(host_level, p1),
                p2: CubeId::new(host_level, p2),
                pstar: CubeId::new(top, star),
            }));
        }
        diagnostics.push(PairDiagnostic { omega: w + 1, first_ball: first, second_ball: second, dilated_ball: dilated });
    }
    Ok(HostPairOutcome::NotFound { diagnostics })
}
