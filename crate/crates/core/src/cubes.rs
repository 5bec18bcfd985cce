//! Dyadic cube systems built from nested nets.
//!
//! Cubes are stored extensionally: every cube knows its member point ids,
//! its center, its parent and its children. Levels run from `k_min`
//! (coarsest) to `k_max` (finest); a cube at level `k` has side length
//! `ℓ(Q) = δ^k` and enclosing ball `B_Q = B(center, 3δ^k)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::{check_delta, scale, NestedNets, PointCloud};

/// Address of a cube: its level and its index within the level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CubeId {
    pub level: i32,
    pub index: usize,
}

impl CubeId {
    pub fn new(level: i32, index: usize) -> Self {
        Self { level, index }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub level: i32,
    pub index: usize,
    pub center: usize,
    /// Index of the parent within level `level - 1`.
    pub parent: Option<usize>,
    /// Indices of the children within level `level + 1`, ordered by center id.
    pub children: Vec<usize>,
    /// Member point ids, ascending.
    pub members: Vec<usize>,
}

impl Cube {
    pub fn id(&self) -> CubeId {
        CubeId::new(self.level, self.index)
    }

    pub fn contains(&self, point: usize) -> bool {
        self.members.binary_search(&point).is_ok()
    }
}

/// Parameters of a shifted dyadic system on the uniform torus grid
/// `{i / grid}` with `δ = 1 / base`.
///
/// At level `k >= 0` the cubes are the half-open arcs
/// `[(j + s_k) / base^k, (j + 1 + s_k) / base^k)` with
/// `s_k = (shift · base^k mod modulus) / modulus`; levels `k <= 0` are the
/// whole torus. Consecutive levels nest because `base · s_k ≡ s_{k+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusLayout {
    pub grid: usize,
    pub base: usize,
    pub shift: usize,
    pub modulus: usize,
}

impl TorusLayout {
    /// Numerator `r_k` of the level-`k` shift `s_k = r_k / modulus`.
    pub fn shift_numerator(&self, k: i32) -> usize {
        let mut r = self.shift % self.modulus;
        for _ in 0..k.max(0) {
            r = r * self.base % self.modulus;
        }
        r
    }

    /// Number of cubes at level `k`.
    pub fn cubes_at(&self, k: i32) -> usize {
        if k <= 0 {
            1
        } else {
            self.base.pow(k as u32)
        }
    }

    /// Index of the level-`k` arc containing grid point `i`.
    pub fn interval_of(&self, k: i32, i: usize) -> usize {
        if k <= 0 {
            return 0;
        }
        let bk = self.base.pow(k as u32) as i64;
        let (n, kk) = (self.grid as i64, self.modulus as i64);
        let r = self.shift_numerator(k) as i64;
        let num = i as i64 * bk * kk - r * n;
        num.div_euclid(n * kk).rem_euclid(bk) as usize
    }

    /// First grid point at or after the left end of arc `j` at level `k`.
    pub fn first_point(&self, k: i32, j: usize) -> usize {
        let k = k.max(0);
        let bk = self.base.pow(k as u32) as i64;
        let (n, kk) = (self.grid as i64, self.modulus as i64);
        let r = self.shift_numerator(k) as i64;
        let num = (j as i64 * kk + r) * n;
        let den = kk * bk;
        ((num + den - 1).div_euclid(den)).rem_euclid(n) as usize
    }
}

/// A dyadic system over a finite cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicSystem {
    delta: f64,
    k_min: i32,
    k_max: i32,
    n_points: usize,
    levels: Vec<Vec<Cube>>,
    /// `owner[k - k_min][point]` is the index of the level-`k` cube holding it.
    owner: Vec<Vec<usize>>,
    layout: Option<TorusLayout>,
}

impl DyadicSystem {
    /// Assembles a system from per-level centers, parent links and the
    /// bottom-level owner of every point. Members propagate up the parent
    /// links.
    fn assemble(
        delta: f64,
        k_min: i32,
        centers: Vec<Vec<usize>>,
        parents: Vec<Vec<usize>>,
        leaf_owner: Vec<usize>,
        layout: Option<TorusLayout>,
    ) -> Result<Self> {
        let depth = centers.len();
        let n_points = leaf_owner.len();
        if depth == 0 {
            return Err(Error::InvalidSystem("no levels".into()));
        }
        if parents.len() + 1 != depth {
            return Err(Error::InvalidSystem("parent links do not match the level count".into()));
        }
        let mut owner = vec![Vec::new(); depth];
        owner[depth - 1] = leaf_owner;
        for li in (0..depth - 1).rev() {
            let links = &parents[li];
            if links.len() != centers[li + 1].len() {
                return Err(Error::InvalidSystem(format!("level {} has a wrong number of parent links", k_min + li as i32 + 1)));
            }
            if let Some(&bad) = links.iter().find(|&&p| p >= centers[li].len()) {
                return Err(Error::InvalidSystem(format!("parent index {bad} out of range")));
            }
            owner[li] = owner[li + 1].iter().map(|&c| links[c]).collect();
        }
        let mut levels = Vec::with_capacity(depth);
        for (li, cs) in centers.iter().enumerate() {
            let level = k_min + li as i32;
            let mut cubes: Vec<Cube> = cs
                .iter()
                .enumerate()
                .map(|(index, &center)| Cube {
                    level,
                    index,
                    center,
                    parent: if li == 0 { None } else { Some(parents[li - 1][index]) },
                    children: Vec::new(),
                    members: Vec::new(),
                })
                .collect();
            for (point, &c) in owner[li].iter().enumerate() {
                if c >= cubes.len() {
                    return Err(Error::InvalidSystem(format!("point {point} owned by missing cube {c}")));
                }
                cubes[c].members.push(point);
            }
            levels.push(cubes);
        }
        for li in 1..depth {
            let (upper, lower) = levels.split_at_mut(li);
            for cube in lower[0].iter() {
                upper[li - 1][cube.parent.expect("non-top cube has a parent")].children.push(cube.index);
            }
            for cube in upper[li - 1].iter_mut() {
                let lower_level = &lower[0];
                cube.children.sort_by_key(|&c| lower_level[c].center);
            }
        }
        for cube in levels.iter().flatten() {
            if cube.members.is_empty() {
                return Err(Error::InvalidSystem(format!("cube {:?} is empty", cube.id())));
            }
            if !cube.contains(cube.center) {
                return Err(Error::InvalidSystem(format!("cube {:?} does not contain its center {}", cube.id(), cube.center)));
            }
        }
        Ok(Self { delta, k_min, k_max: k_min + depth as i32 - 1, n_points, levels, owner, layout })
    }

    /// Shifted dyadic arcs on the torus grid `{i / grid}` with `δ = 1 / base`;
    /// see [`TorusLayout`]. Requires `base^k_max` to divide `grid`.
    pub fn canonical_torus(grid: usize, base: usize, k_min: i32, k_max: i32, shift: usize, modulus: usize) -> Result<Self> {
        if base < 2 || modulus == 0 || grid == 0 {
            return Err(crate::error::invalid("canonical torus needs base >= 2, modulus >= 1 and a nonempty grid"));
        }
        if k_min > k_max {
            return Err(crate::error::invalid(format!("k_min = {k_min} exceeds k_max = {k_max}")));
        }
        if k_max > 0 && grid % base.pow(k_max as u32) != 0 {
            return Err(crate::error::invalid(format!("grid {grid} is not divisible by {base}^{k_max}")));
        }
        let layout = TorusLayout { grid, base, shift: shift % modulus, modulus };
        let arc_len = |k: i32| if k <= 0 { grid } else { grid / base.pow(k as u32) };
        // Finest arcs are centered at their middle point; above that a cube
        // takes the center of its child number ⌊b/2⌋ or ⌊(b-1)/2⌋ by level
        // parity, which keeps centers a fixed fraction of the side away
        // from both arc ends while every center stays in its own chain.
        let depth = (k_max - k_min + 1) as usize;
        let mut centers: Vec<Vec<usize>> = vec![Vec::new(); depth];
        centers[depth - 1] = (0..layout.cubes_at(k_max))
            .map(|j| (layout.first_point(k_max, j) + arc_len(k_max) / 2) % grid)
            .collect();
        for k in (k_min..k_max).rev() {
            let li = (k - k_min) as usize;
            let d = if k.rem_euclid(2) == 0 { base / 2 } else { (base - 1) / 2 };
            centers[li] = (0..layout.cubes_at(k))
                .map(|j| {
                    let child = layout.interval_of(k + 1, (layout.first_point(k, j) + d * arc_len(k + 1)) % grid);
                    centers[li + 1][child]
                })
                .collect();
        }
        let parents: Vec<Vec<usize>> = (k_min + 1..=k_max)
            .map(|k| centers[(k - k_min) as usize].iter().map(|&c| layout.interval_of(k - 1, c)).collect())
            .collect();
        let leaf_owner = (0..grid).map(|i| layout.interval_of(k_max, i)).collect();
        Self::assemble(1.0 / base as f64, k_min, centers, parents, leaf_owner, Some(layout))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn k_min(&self) -> i32 {
        self.k_min
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn layout(&self) -> Option<&TorusLayout> {
        self.layout.as_ref()
    }

    pub fn has_level(&self, k: i32) -> bool {
        (self.k_min..=self.k_max).contains(&k)
    }

    fn slot(&self, k: i32) -> Result<usize> {
        if !self.has_level(k) {
            return Err(Error::LevelOutOfRange { level: k, k_min: self.k_min, k_max: self.k_max });
        }
        Ok((k - self.k_min) as usize)
    }

    /// Cubes of level `k`, empty when `k` is out of range.
    pub fn level(&self, k: i32) -> &[Cube] {
        self.slot(k).map(|s| self.levels[s].as_slice()).unwrap_or(&[])
    }

    pub fn levels(&self) -> impl Iterator<Item = (i32, &[Cube])> {
        self.levels.iter().enumerate().map(move |(i, c)| (self.k_min + i as i32, c.as_slice()))
    }

    pub fn cubes(&self) -> impl Iterator<Item = &Cube> {
        self.levels.iter().flatten()
    }

    pub fn cube_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn cube(&self, id: CubeId) -> Result<&Cube> {
        let s = self.slot(id.level).map_err(|_| Error::UnknownCube(id))?;
        self.levels[s].get(id.index).ok_or(Error::UnknownCube(id))
    }

    /// The level-`k` cube holding `point`.
    pub fn cube_of(&self, k: i32, point: usize) -> Result<CubeId> {
        let s = self.slot(k)?;
        Ok(CubeId::new(k, self.owner[s][point]))
    }

    /// Owner indices of all points at level `k`.
    pub fn owners(&self, k: i32) -> Result<&[usize]> {
        Ok(&self.owner[self.slot(k)?])
    }

    /// Side length `δ^k`.
    pub fn side(&self, k: i32) -> f64 {
        scale(self.delta, k)
    }

    /// Radius of the enclosing ball `B_Q`, `3δ^k`.
    pub fn ball_radius(&self, k: i32) -> f64 {
        3.0 * self.side(k)
    }

    /// Centers of every level, as nested nets.
    pub fn centers(&self, k: i32) -> Vec<usize> {
        self.level(k).iter().map(|c| c.center).collect()
    }

    /// The unique level `lev(Q) - p` cube containing `Q`.
    pub fn ancestor(&self, id: CubeId, p: u32) -> Result<CubeId> {
        let mut cube = self.cube(id)?;
        let target = id.level - p as i32;
        if target < self.k_min {
            return Err(Error::LevelOutOfRange { level: target, k_min: self.k_min, k_max: self.k_max });
        }
        while cube.level > target {
            let parent = cube.parent.expect("cube above k_min has a parent");
            cube = &self.level(cube.level - 1)[parent];
        }
        Ok(cube.id())
    }

    /// Checks partition, nestedness, the descendant identity and the center
    /// chain directly from the member lists.
    pub fn verify_axioms(&self) -> AxiomReport {
        let n = self.n_points;
        let depth = self.levels.len();
        let mut report = AxiomReport { partition: true, nested: true, descendants: true, center_chain: true, cubes: self.cube_count() };
        // owner maps recomputed from member lists only
        let mut own = vec![vec![usize::MAX; n]; depth];
        for (li, cubes) in self.levels.iter().enumerate() {
            let mut hits = vec![0u32; n];
            for c in cubes {
                for &p in &c.members {
                    if p >= n {
                        report.partition = false;
                        continue;
                    }
                    hits[p] += 1;
                    own[li][p] = c.index;
                }
            }
            if hits.iter().any(|&h| h != 1) {
                report.partition = false;
            }
        }
        if !report.partition {
            report.nested = false;
            report.descendants = false;
            report.center_chain = false;
            return report;
        }
        for a in 0..depth {
            for b in a + 1..depth {
                let mut covered = vec![0usize; self.levels[a].len()];
                for q in &self.levels[b] {
                    let host = own[a][q.members[0]];
                    if q.members.iter().any(|&p| own[a][p] != host) {
                        report.nested = false;
                    } else {
                        covered[host] += q.members.len();
                    }
                }
                if covered.iter().zip(&self.levels[a]).any(|(c, p)| *c != p.members.len()) {
                    report.descendants = false;
                }
            }
        }
        for a in 0..depth {
            for q in &self.levels[a] {
                for b in a..depth {
                    let holder = &self.levels[b][own[b][q.center]];
                    if holder.center != q.center {
                        report.center_chain = false;
                    }
                }
            }
        }
        report
    }

    /// Inner and outer ball ratios of every cube against `δ^k`.
    pub fn verify_sandwich(&self, cloud: &PointCloud) -> SandwichReport {
        let mut report = SandwichReport {
            min_inner_ratio: f64::INFINITY,
            max_outer_ratio: 0.0,
            worst_inner: None,
            worst_outer: None,
            pass: true,
        };
        for (k, cubes) in self.levels() {
            let side = self.side(k);
            let own = &self.owner[(k - self.k_min) as usize];
            let mut inner = vec![f64::INFINITY; cubes.len()];
            let mut outer = vec![0.0f64; cubes.len()];
            for y in 0..self.n_points {
                for (ci, c) in cubes.iter().enumerate() {
                    let d = cloud.dist(c.center, y);
                    if own[y] == ci {
                        outer[ci] = outer[ci].max(d);
                    } else {
                        inner[ci] = inner[ci].min(d);
                    }
                }
            }
            for (ci, c) in cubes.iter().enumerate() {
                let (ri, ro) = (inner[ci] / side, outer[ci] / side);
                if ri < report.min_inner_ratio {
                    report.min_inner_ratio = ri;
                    report.worst_inner = Some(c.id());
                }
                if ro > report.max_outer_ratio {
                    report.max_outer_ratio = ro;
                    report.worst_outer = Some(c.id());
                }
            }
        }
        report.pass = report.min_inner_ratio >= 0.2 && report.max_outer_ratio <= 3.0;
        report
    }

    pub fn to_export(&self) -> SystemExport {
        SystemExport {
            delta: self.delta,
            k_min: self.k_min,
            k_max: self.k_max,
            n_points: self.n_points,
            layout: self.layout,
            cubes: self
                .cubes()
                .map(|c| CubeExport { level: c.level, index: c.index, center: c.center, parent: c.parent, members: c.members.clone() })
                .collect(),
        }
    }

    /// Rebuilds a system from its export, re-deriving children and owners.
    pub fn from_export(export: &SystemExport) -> Result<Self> {
        check_delta(export.delta)?;
        if export.k_min > export.k_max {
            return Err(Error::InvalidSystem("k_min exceeds k_max".into()));
        }
        let depth = (export.k_max - export.k_min + 1) as usize;
        let mut centers: Vec<Vec<(usize, usize)>> = vec![Vec::new(); depth];
        let mut parents: Vec<Vec<(usize, usize)>> = vec![Vec::new(); depth];
        let mut leaf_owner = vec![usize::MAX; export.n_points];
        for c in &export.cubes {
            if c.level < export.k_min || c.level > export.k_max {
                return Err(Error::InvalidSystem(format!("cube level {} out of range", c.level)));
            }
            let li = (c.level - export.k_min) as usize;
            centers[li].push((c.index, c.center));
            if li > 0 {
                let p = c.parent.ok_or_else(|| Error::InvalidSystem(format!("cube ({}, {}) lacks a parent", c.level, c.index)))?;
                parents[li].push((c.index, p));
            }
            if li == depth - 1 {
                for &m in &c.members {
                    if m >= export.n_points {
                        return Err(Error::InvalidSystem(format!("member {m} out of range")));
                    }
                    leaf_owner[m] = c.index;
                }
            }
        }
        if leaf_owner.contains(&usize::MAX) {
            return Err(Error::InvalidSystem("bottom level does not cover every point".into()));
        }
        let dense = |mut v: Vec<(usize, usize)>| -> Result<Vec<usize>> {
            v.sort_unstable();
            if v.iter().enumerate().any(|(i, (idx, _))| *idx != i) {
                return Err(Error::InvalidSystem("cube indices are not dense".into()));
            }
            Ok(v.into_iter().map(|(_, x)| x).collect())
        };
        let centers: Vec<Vec<usize>> = centers.into_iter().map(dense).collect::<Result<_>>()?;
        let parents: Vec<Vec<usize>> = parents.into_iter().skip(1).map(dense).collect::<Result<_>>()?;
        let system = Self::assemble(export.delta, export.k_min, centers, parents, leaf_owner, export.layout)?;
        // member lists must agree with what the links imply
        for c in &export.cubes {
            let mut m = c.members.clone();
            m.sort_unstable();
            if system.cube(CubeId::new(c.level, c.index))?.members != m {
                return Err(Error::InvalidSystem(format!("members of cube ({}, {}) disagree with the parent links", c.level, c.index)));
            }
        }
        Ok(system)
    }
}

/// One cube per net point per level; level-`k+1` centers persist into their
/// own cube or attach to the closest level-`k` center (smaller id on ties).
/// Points outside the finest net attach to the closest finest center.
pub fn build_dyadic_system(cloud: &PointCloud, nets: &NestedNets) -> Result<DyadicSystem> {
    let report = nets.verify(cloud);
    if let Some((level, next, point)) = report.nesting_violation {
        return Err(Error::NotNested { level, next, point });
    }
    let centers: Vec<Vec<usize>> = nets.levels().map(|(_, s)| s.members.clone()).collect();
    let mut parents = Vec::with_capacity(centers.len().saturating_sub(1));
    for w in centers.windows(2) {
        parents.push(w[1].iter().map(|&z| closest_center(cloud, &w[0], z)).collect());
    }
    let bottom = centers.last().expect("nets have a level");
    let leaf_owner = (0..cloud.len()).map(|x| closest_center(cloud, bottom, x)).collect();
    DyadicSystem::assemble(nets.delta, nets.k_min, centers, parents, leaf_owner, None)
}

/// Index into `centers` (ascending ids) of the center closest to `x`; `x`
/// itself when it is a center, smaller id on ties.
fn closest_center(cloud: &PointCloud, centers: &[usize], x: usize) -> usize {
    if let Ok(i) = centers.binary_search(&x) {
        return i;
    }
    let mut best = (f64::INFINITY, 0);
    for (i, &c) in centers.iter().enumerate() {
        let d = cloud.dist(x, c);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

/// Outcome of [`DyadicSystem::verify_axioms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AxiomReport {
    pub partition: bool,
    pub nested: bool,
    pub descendants: bool,
    pub center_chain: bool,
    pub cubes: usize,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.partition && self.nested && self.descendants && self.center_chain
    }
}

/// Outcome of [`DyadicSystem::verify_sandwich`]. Ratios are against `δ^k`;
/// the pass threshold is inner `>= 1/5` and outer `<= 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    pub min_inner_ratio: f64,
    pub max_outer_ratio: f64,
    pub worst_inner: Option<CubeId>,
    pub worst_outer: Option<CubeId>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeExport {
    pub level: i32,
    pub index: usize,
    pub center: usize,
    pub parent: Option<usize>,
    pub members: Vec<usize>,
}

/// JSON form of a [`DyadicSystem`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemExport {
    pub delta: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub n_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<TorusLayout>,
    pub cubes: Vec<CubeExport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::build_nested_nets;

    fn line16_system() -> (PointCloud, DyadicSystem) {
        let cloud = PointCloud::line_grid(16);
        let nets = build_nested_nets(&cloud, 0.5, 0, 4, None).unwrap();
        let sys = build_dyadic_system(&cloud, &nets).unwrap();
        (cloud, sys)
    }

    #[test]
    fn line16_gives_standard_intervals() {
        let (_, sys) = line16_system();
        for k in 0..=4 {
            let width = 16 >> k;
            for (j, cube) in sys.level(k).iter().enumerate() {
                let expected: Vec<usize> = (j * width..(j + 1) * width).collect();
                assert_eq!(cube.members, expected, "level {k} cube {j}");
                assert_eq!(cube.center, j * width);
            }
        }
        assert!(sys.verify_axioms().passed());
    }

    #[test]
    fn ancestor_walks_parents() {
        let (_, sys) = line16_system();
        let q = sys.cube_of(2, 4).unwrap();
        assert_eq!(sys.ancestor(q, 0).unwrap(), q);
        let a = sys.ancestor(q, 1).unwrap();
        assert_eq!(sys.cube(a).unwrap().members, (0..8).collect::<Vec<_>>());
        assert_eq!(sys.ancestor(q, 2).unwrap(), CubeId::new(0, 0));
        assert!(matches!(sys.ancestor(q, 3), Err(Error::LevelOutOfRange { .. })));
    }

    #[test]
    fn one_point_chain() {
        let cloud = PointCloud::line(vec![0.25]).unwrap();
        let nets = build_nested_nets(&cloud, 0.5, -1, 2, None).unwrap();
        let sys = build_dyadic_system(&cloud, &nets).unwrap();
        assert!(sys.levels().all(|(_, c)| c.len() == 1 && c[0].members == vec![0]));
        let s = sys.verify_sandwich(&cloud);
        assert!(s.min_inner_ratio.is_infinite() && s.pass);
    }

    #[test]
    fn line16_sandwich_ratios() {
        // left-end centers: the half-line cube [1/2, 1) has its nearest
        // outsider 1/16 away, so the inner ratio bottoms out at 1/8
        let (cloud, sys) = line16_system();
        let s = sys.verify_sandwich(&cloud);
        assert_eq!(s.min_inner_ratio, 0.125);
        assert_eq!(s.worst_inner, Some(CubeId::new(1, 1)));
        assert_eq!(s.max_outer_ratio, 15.0 / 16.0);
        assert_eq!(s.worst_outer, Some(CubeId::new(0, 0)));
        assert!(!s.pass);
    }

    #[test]
    fn canonical_torus_matches_shifted_arcs() {
        let sys = DyadicSystem::canonical_torus(16, 2, 0, 4, 1, 3).unwrap();
        assert!(sys.verify_axioms().passed());
        // level 1 shift 2/3 of 1/2 = 1/3: arcs [1/3, 5/6) and [5/6, 4/3)
        let a = &sys.level(1)[0];
        assert_eq!(a.members, (6..=13).collect::<Vec<_>>());
        // odd levels take child 0, even levels child 1: 8 heads [8, 9] at level 3
        assert_eq!(a.center, 8);
        // level 2 shift 1/3 of 1/4 = 1/12
        assert_eq!(sys.level(2)[0].members, vec![2, 3, 4, 5]);
        assert_eq!(sys.level(2)[0].center, 4);
    }

    #[test]
    fn canonical_centers_keep_inner_balls() {
        for (grid, base, k_max, shift, modulus) in [(16, 2, 4, 1, 3), (1024, 2, 10, 2, 3), (1024, 4, 5, 0, 1), (729, 3, 6, 1, 3)] {
            let sys = DyadicSystem::canonical_torus(grid, base, -1, k_max, shift, modulus).unwrap();
            let s = sys.verify_sandwich(&PointCloud::torus_grid(grid));
            assert!(sys.verify_axioms().passed());
            assert!(s.min_inner_ratio >= 0.2 && s.max_outer_ratio <= 3.0, "{grid} {base}: {s:?}");
        }
    }

    #[test]
    fn export_round_trip() {
        let (_, sys) = line16_system();
        let json = serde_json::to_string(&sys.to_export()).unwrap();
        let back: SystemExport = serde_json::from_str(&json).unwrap();
        assert_eq!(DyadicSystem::from_export(&back).unwrap(), sys);
    }

    #[test]
    fn export_with_wrong_members_is_rejected() {
        let (_, sys) = line16_system();
        let mut export = sys.to_export();
        export.cubes[1].members.pop();
        assert!(DyadicSystem::from_export(&export).is_err());
    }
}
