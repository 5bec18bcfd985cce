//! Haar functions, conditional expectations and martingale differences for
//! vector-valued functions on a dyadic system.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cubes::{CubeId, DyadicSystem};
use crate::error::{invalid, Error, Result};
use crate::metric::Measure;

/// `R^d` with the `ℓ^q` norm, together with the type and cotype used by the
/// norm bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormedSpace {
    pub dim: usize,
    /// `ℓ^q` exponent, `f64::INFINITY` allowed.
    pub q: f64,
    pub type_t: f64,
    pub cotype_q: f64,
}

impl NormedSpace {
    /// `ℓ^q_d` with type `min(q, 2)` and cotype `max(q, 2)`.
    pub fn lq(dim: usize, q: f64) -> Result<Self> {
        let (t, c) = if q.is_infinite() { (1.0, f64::INFINITY) } else { (q.min(2.0), q.max(2.0)) };
        Self::new(dim, q, t, c)
    }

    pub fn scalar() -> Self {
        Self { dim: 1, q: 2.0, type_t: 2.0, cotype_q: 2.0 }
    }

    pub fn new(dim: usize, q: f64, type_t: f64, cotype_q: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        if !(q >= 1.0) {
            return Err(invalid(format!("norm exponent must be >= 1, got {q}")));
        }
        if !(1.0..=2.0).contains(&type_t) {
            return Err(invalid(format!("type must lie in [1, 2], got {type_t}")));
        }
        if !(cotype_q >= 2.0) {
            return Err(invalid(format!("cotype must be >= 2, got {cotype_q}")));
        }
        Ok(Self { dim, q, type_t, cotype_q })
    }

    pub fn norm(&self, v: &[f64]) -> f64 {
        if self.q.is_infinite() {
            v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
        } else if self.q == 2.0 {
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        } else if self.q == 1.0 {
            v.iter().map(|x| x.abs()).sum()
        } else {
            v.iter().map(|x| x.abs().powf(self.q)).sum::<f64>().powf(1.0 / self.q)
        }
    }
}

/// A function from the point ids `0..n` into `R^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorFunction {
    dim: usize,
    values: Vec<f64>,
}

impl VectorFunction {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.len() % dim != 0 {
            return Err(invalid(format!("{} values do not form rows of width {dim}", values.len())));
        }
        Ok(Self { dim, values })
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Self { dim, values: vec![0.0; n * dim] }
    }

    pub fn from_scalar(values: Vec<f64>) -> Self {
        Self { dim: 1, values }
    }

    /// `f(x) = g(x)` for every point.
    pub fn from_fn(n: usize, dim: usize, mut g: impl FnMut(usize) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(n * dim);
        for x in 0..n {
            let v = g(x);
            assert_eq!(v.len(), dim, "row width");
            values.extend(v);
        }
        Self { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, x: usize) -> &[f64] {
        &self.values[x * self.dim..(x + 1) * self.dim]
    }

    pub fn value_mut(&mut self, x: usize) -> &mut [f64] {
        &mut self.values[x * self.dim..(x + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        if other.dim != self.dim || other.values.len() != self.values.len() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), got: other.values.len() });
        }
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if other.dim != self.dim || other.values.len() != self.values.len() {
            return Err(Error::DimensionMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(Self { dim: self.dim, values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() })
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Largest componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// CSV with header `point_id,e1,...,ed`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("point_id");
        for i in 1..=self.dim {
            out.push_str(&format!(",e{i}"));
        }
        out.push('\n');
        for x in 0..self.len() {
            out.push_str(&x.to_string());
            for v in self.value(x) {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// One Haar function `h_Q^θ`: constant `values[c]` on child `children[c]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarFunction {
    pub cube: CubeId,
    /// Branch index `θ`, from 1.
    pub branch: usize,
    pub children: Vec<usize>,
    pub values: Vec<f64>,
}

impl HaarFunction {
    /// Value at `point`, zero outside the cube.
    pub fn eval(&self, system: &DyadicSystem, point: usize) -> Result<f64> {
        let child = system.cube_of(self.cube.level + 1, point)?;
        Ok(self.children.iter().position(|&c| c == child.index).map_or(0.0, |i| self.values[i]))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// All Haar functions of a system, keyed by cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarSystem {
    functions: BTreeMap<CubeId, Vec<HaarFunction>>,
}

/// For children with masses `μ_1..μ_n` (ordered by center id), branch `θ`
/// takes `√(R/(μ_θ S))` on child `θ` and `-√(μ_θ/(R S))` on later children,
/// where `S = μ_θ + ... + μ_n` and `R = S - μ_θ`. These are the Gram-Schmidt
/// output of the child indicators, normalized in `L²(μ)`.
pub fn build_haar_system(system: &DyadicSystem, mu: &Measure) -> Result<HaarSystem> {
    if mu.len() != system.n_points() {
        return Err(Error::DimensionMismatch { expected: system.n_points(), got: mu.len() });
    }
    let mut functions = BTreeMap::new();
    for q in system.cubes() {
        if q.children.len() < 2 {
            continue;
        }
        let next = system.level(q.level + 1);
        let masses: Vec<f64> = q.children.iter().map(|&c| mu.mass(&next[c].members)).collect();
        let n = masses.len();
        let mut hs = Vec::with_capacity(n - 1);
        for theta in 0..n - 1 {
            let s: f64 = masses[theta..].iter().sum();
            let r = s - masses[theta];
            let mut values = vec![0.0; n];
            values[theta] = (r / (masses[theta] * s)).sqrt();
            let tail = -(masses[theta] / (r * s)).sqrt();
            values[theta + 1..].iter_mut().for_each(|v| *v = tail);
            hs.push(HaarFunction { cube: q.id(), branch: theta + 1, children: q.children.clone(), values });
        }
        functions.insert(q.id(), hs);
    }
    Ok(HaarSystem { functions })
}

impl HaarSystem {
    pub fn get(&self, cube: CubeId, branch: usize) -> Option<&HaarFunction> {
        self.functions.get(&cube).and_then(|h| branch.checked_sub(1).and_then(|b| h.get(b)))
    }

    /// Number of branches on `cube`, `|ch(Q)| - 1`.
    pub fn branches(&self, cube: CubeId) -> usize {
        self.functions.get(&cube).map_or(0, Vec::len)
    }

    pub fn functions(&self) -> impl Iterator<Item = &HaarFunction> {
        self.functions.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.functions.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Dense values of one Haar function over all points.
    pub fn dense(&self, system: &DyadicSystem, cube: CubeId, branch: usize) -> Result<Vec<f64>> {
        let h = self.get(cube, branch).ok_or(Error::UnknownCube(cube))?;
        let mut out = vec![0.0; system.n_points()];
        let next = system.level(cube.level + 1);
        for (&c, &v) in h.children.iter().zip(&h.values) {
            for &x in &next[c].members {
                out[x] = v;
            }
        }
        Ok(out)
    }
}

/// Average of `f` over every block of a partition of the points.
pub fn conditional_expectation(f: &VectorFunction, partition: &[Vec<usize>], mu: &Measure) -> Result<VectorFunction> {
    let n = f.len();
    if mu.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: mu.len() });
    }
    let mut seen = vec![false; n];
    for block in partition {
        if block.is_empty() {
            return Err(Error::InvalidPartition("empty block".into()));
        }
        for &x in block {
            if x >= n {
                return Err(Error::InvalidPartition(format!("point {x} is out of range")));
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidPartition(format!("point {x} appears twice")));
            }
        }
    }
    if let Some(x) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!("point {x} is not covered")));
    }
    let mut out = VectorFunction::zeros(n, f.dim());
    for block in partition {
        let avg = block_average(f, block, mu);
        for &x in block {
            out.value_mut(x).copy_from_slice(&avg);
        }
    }
    Ok(out)
}

/// Weighted average over a block; a block on which `f` is already constant
/// returns that value untouched, so `E[f] = f` holds bit for bit when `f` is
/// measurable.
fn block_average(f: &VectorFunction, block: &[usize], mu: &Measure) -> Vec<f64> {
    let first = f.value(block[0]);
    if block.iter().all(|&x| f.value(x) == first) {
        return first.to_vec();
    }
    let mut sum = vec![0.0; f.dim()];
    let mut mass = 0.0;
    for &x in block {
        let w = mu.weight(x);
        mass += w;
        sum.iter_mut().zip(f.value(x)).for_each(|(s, v)| *s += w * v);
    }
    sum.iter_mut().for_each(|s| *s /= mass);
    sum
}

/// `E_k f`, the average over level-`k` cubes.
pub fn level_expectation(f: &VectorFunction, system: &DyadicSystem, k: i32, mu: &Measure) -> Result<VectorFunction> {
    if f.len() != system.n_points() || mu.len() != system.n_points() {
        return Err(Error::DimensionMismatch { expected: system.n_points(), got: f.len() });
    }
    let cubes = system.level(k);
    if cubes.is_empty() {
        return Err(Error::LevelOutOfRange { level: k, k_min: system.k_min(), k_max: system.k_max() });
    }
    let mut out = VectorFunction::zeros(f.len(), f.dim());
    for q in cubes {
        let avg = block_average(f, &q.members, mu);
        for &x in &q.members {
            out.value_mut(x).copy_from_slice(&avg);
        }
    }
    Ok(out)
}

/// `D_k f = E_{k+1} f - E_k f` for `k = k_min..k_max-1`.
pub fn martingale_differences(f: &VectorFunction, system: &DyadicSystem, mu: &Measure) -> Result<Vec<(i32, VectorFunction)>> {
    let mut out = Vec::new();
    let mut prev = level_expectation(f, system, system.k_min(), mu)?;
    for k in system.k_min()..system.k_max() {
        let next = level_expectation(f, system, k + 1, mu)?;
        out.push((k, next.sub(&prev)?));
        prev = next;
    }
    Ok(out)
}

/// Address of a Haar coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HaarIndex {
    pub cube: CubeId,
    pub branch: usize,
}

impl HaarIndex {
    pub fn new(cube: CubeId, branch: usize) -> Self {
        Self { cube, branch }
    }
}

/// E-valued Haar coefficients `⟨f, h_Q^θ⟩`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HaarCoefficients {
    pub dim: usize,
    pub coeffs: BTreeMap<HaarIndex, Vec<f64>>,
}

impl HaarCoefficients {
    pub fn new(dim: usize) -> Self {
        Self { dim, coeffs: BTreeMap::new() }
    }

    pub fn insert(&mut self, idx: HaarIndex, value: Vec<f64>) -> Result<()> {
        if value.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: value.len() });
        }
        self.coeffs.insert(idx, value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }
}

/// Top-level averages plus Haar coefficients of a function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaarExpansion {
    /// Average over each cube of level `k_min`, by cube index.
    pub averages: Vec<Vec<f64>>,
    pub coefficients: HaarCoefficients,
}

fn check_leaves(system: &DyadicSystem) -> Result<()> {
    for q in system.level(system.k_max()) {
        if q.members.len() != 1 {
            return Err(Error::LeavesNotSingletons(q.id(), q.members.len()));
        }
    }
    Ok(())
}

/// `f = Σ_{top} ⟨f⟩_Q 1_Q + Σ_{Q,θ} ⟨f, h_Q^θ⟩ h_Q^θ`; needs singleton leaves.
pub fn expand(f: &VectorFunction, system: &DyadicSystem, haar: &HaarSystem, mu: &Measure) -> Result<HaarExpansion> {
    check_leaves(system)?;
    if f.len() != system.n_points() || mu.len() != system.n_points() {
        return Err(Error::DimensionMismatch { expected: system.n_points(), got: f.len() });
    }
    let d = f.dim();
    // integrals ∫_Q f dμ per cube, built bottom-up
    let mut integrals: Vec<Vec<Vec<f64>>> = Vec::new();
    let mut masses: Vec<Vec<f64>> = Vec::new();
    for (_, cubes) in system.levels() {
        integrals.push(vec![vec![0.0; d]; cubes.len()]);
        masses.push(vec![0.0; cubes.len()]);
    }
    let bottom = integrals.len() - 1;
    let own = system.owners(system.k_max())?;
    for x in 0..f.len() {
        let w = mu.weight(x);
        masses[bottom][own[x]] += w;
        integrals[bottom][own[x]].iter_mut().zip(f.value(x)).for_each(|(s, v)| *s += w * v);
    }
    for li in (0..bottom).rev() {
        let k = system.k_min() + li as i32;
        for (qi, q) in system.level(k).iter().enumerate() {
            for &c in &q.children {
                masses[li][qi] += masses[li + 1][c];
                for i in 0..d {
                    integrals[li][qi][i] += integrals[li + 1][c][i];
                }
            }
        }
    }
    let averages = integrals[0].iter().zip(&masses[0]).map(|(s, m)| s.iter().map(|v| v / m).collect()).collect();
    let mut coefficients = HaarCoefficients::new(d);
    for h in haar.functions() {
        let li = (h.cube.level + 1 - system.k_min()) as usize;
        let mut x = vec![0.0; d];
        for (&c, &v) in h.children.iter().zip(&h.values) {
            x.iter_mut().zip(&integrals[li][c]).for_each(|(a, s)| *a += v * s);
        }
        coefficients.coeffs.insert(HaarIndex::new(h.cube, h.branch), x);
    }
    Ok(HaarExpansion { averages, coefficients })
}

/// Inverse of [`expand`]. Averages may be omitted (zero top-level part).
pub fn reconstruct(
    coefficients: &HaarCoefficients,
    averages: Option<&[Vec<f64>]>,
    system: &DyadicSystem,
    haar: &HaarSystem,
) -> Result<VectorFunction> {
    let d = coefficients.dim;
    if d == 0 {
        return Err(invalid("coefficients have dimension 0"));
    }
    // value added on every point of a cube, pushed down level by level
    let mut add: Vec<Vec<f64>> = system.levels().map(|(_, c)| vec![0.0; c.len() * d]).collect();
    if let Some(avg) = averages {
        let top = system.level(system.k_min());
        if avg.len() != top.len() {
            return Err(Error::DimensionMismatch { expected: top.len(), got: avg.len() });
        }
        for (qi, a) in avg.iter().enumerate() {
            if a.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: a.len() });
            }
            add[0][qi * d..(qi + 1) * d].copy_from_slice(a);
        }
    }
    for (idx, x) in &coefficients.coeffs {
        let h = haar.get(idx.cube, idx.branch).ok_or(Error::UnknownCube(idx.cube))?;
        let li = (idx.cube.level + 1 - system.k_min()) as usize;
        for (&c, &v) in h.children.iter().zip(&h.values) {
            for i in 0..d {
                add[li][c * d + i] += v * x[i];
            }
        }
    }
    for li in 1..add.len() {
        let k = system.k_min() + li as i32;
        let (upper, lower) = add.split_at_mut(li);
        for (qi, q) in system.level(k).iter().enumerate() {
            let p = q.parent.expect("non-top cube");
            for i in 0..d {
                lower[0][qi * d + i] += upper[li - 1][p * d + i];
            }
        }
    }
    let own = system.owners(system.k_max())?;
    let bottom = add.last().expect("at least one level");
    let mut out = VectorFunction::zeros(system.n_points(), d);
    for x in 0..system.n_points() {
        out.value_mut(x).copy_from_slice(&bottom[own[x] * d..(own[x] + 1) * d]);
    }
    Ok(out)
}

/// Largest deviation of the Haar Gram matrix from the identity, including
/// inner products against the constant function. Pairs with disjoint
/// supports are exactly zero and skipped.
pub fn gram_deviation(haar: &HaarSystem, system: &DyadicSystem, mu: &Measure) -> Result<f64> {
    let dense: BTreeMap<HaarIndex, Vec<f64>> = haar
        .functions()
        .map(|h| Ok((HaarIndex::new(h.cube, h.branch), haar.dense(system, h.cube, h.branch)?)))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (a, va) in &dense {
        let members = &system.cube(a.cube)?.members;
        let mean: f64 = members.iter().map(|&x| va[x] * mu.weight(x)).sum();
        worst = worst.max(mean.abs());
        // partners: same cube, or any cube containing it
        for up in 0..=(a.cube.level - system.k_min()) as u32 {
            let anc = system.ancestor(a.cube, up)?;
            for branch in 1..=haar.branches(anc) {
                let b = HaarIndex::new(anc, branch);
                if up == 0 && b < *a {
                    continue;
                }
                let vb = &dense[&b];
                let ip: f64 = members.iter().map(|&x| va[x] * vb[x] * mu.weight(x)).sum();
                let target = if b == *a { 1.0 } else { 0.0 };
                worst = worst.max((ip - target).abs());
            }
        }
    }
    Ok(worst)
}

/// Extremes of `‖h_Q‖_∞ μ(Q)^{1/2}` and of `max_c |h_Q(c)| μ(c)^{1/2}` over
/// all Haar functions, checked against a budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopeReport {
    pub max_upper: f64,
    pub min_lower: f64,
    pub budget: f64,
    pub pass: bool,
}

pub fn haar_envelope_check(haar: &HaarSystem, system: &DyadicSystem, mu: &Measure, budget: f64) -> Result<EnvelopeReport> {
    let mut max_upper = 0.0f64;
    let mut min_lower = f64::INFINITY;
    for h in haar.functions() {
        let mq = mu.mass(&system.cube(h.cube)?.members);
        max_upper = max_upper.max(h.sup_norm() * mq.sqrt());
        let next = system.level(h.cube.level + 1);
        let lower = h
            .children
            .iter()
            .zip(&h.values)
            .map(|(&c, v)| v.abs() * mu.mass(&next[c].members).sqrt())
            .fold(0.0f64, f64::max);
        min_lower = min_lower.min(lower);
    }
    let pass = max_upper <= budget && min_lower >= 1.0 / budget;
    Ok(EnvelopeReport { max_upper, min_lower, budget, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line_system() -> (DyadicSystem, Measure) {
        (DyadicSystem::canonical_torus(8, 2, 0, 3, 0, 1).unwrap(), Measure::uniform(8))
    }

    #[test]
    fn two_children_haar_values() {
        let (sys, mu) = line_system();
        let haar = build_haar_system(&sys, &mu).unwrap();
        assert_eq!(haar.len(), 7);
        let h = haar.get(CubeId::new(0, 0), 1).unwrap();
        // uniform halves of mass 1/2: values ±1
        assert_relative_eq!(h.values[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(h.values[1], -1.0, epsilon = 1e-15);
    }

    #[test]
    fn three_children_are_orthonormal() {
        let sys = DyadicSystem::canonical_torus(9, 3, 0, 2, 0, 1).unwrap();
        let mu = Measure::new(vec![1.0, 2.0, 3.0, 1.0, 1.0, 1.0, 5.0, 0.5, 0.5]).unwrap();
        let haar = build_haar_system(&sys, &mu).unwrap();
        let top = CubeId::new(0, 0);
        assert_eq!(haar.branches(top), 2);
        let a = haar.dense(&sys, top, 1).unwrap();
        let b = haar.dense(&sys, top, 2).unwrap();
        let ip = |u: &[f64], v: &[f64]| u.iter().zip(v).enumerate().map(|(x, (p, q))| p * q * mu.weight(x)).sum::<f64>();
        assert_relative_eq!(ip(&a, &a), 1.0, epsilon = 1e-12);
        assert_relative_eq!(ip(&b, &b), 1.0, epsilon = 1e-12);
        assert_relative_eq!(ip(&a, &b), 0.0, epsilon = 1e-12);
        assert_relative_eq!(ip(&a, &[1.0; 9]), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn expansion_round_trip() {
        let (sys, mu) = line_system();
        let haar = build_haar_system(&sys, &mu).unwrap();
        let f = VectorFunction::from_fn(8, 2, |x| vec![x as f64, (x * x) as f64 - 3.0]);
        let e = expand(&f, &sys, &haar, &mu).unwrap();
        let g = reconstruct(&e.coefficients, Some(&e.averages), &sys, &haar).unwrap();
        assert!(f.max_abs_diff(&g) < 1e-12);
    }

    #[test]
    fn expansion_needs_singletons() {
        let sys = DyadicSystem::canonical_torus(8, 2, 0, 2, 0, 1).unwrap();
        let mu = Measure::uniform(8);
        let haar = build_haar_system(&sys, &mu).unwrap();
        let f = VectorFunction::zeros(8, 1);
        assert!(matches!(expand(&f, &sys, &haar, &mu), Err(Error::LeavesNotSingletons(_, 2))));
    }

    #[test]
    fn partition_validation() {
        let f = VectorFunction::from_scalar(vec![1.0, 2.0, 3.0]);
        let mu = Measure::uniform(3);
        assert!(conditional_expectation(&f, &[vec![0, 1]], &mu).is_err());
        assert!(conditional_expectation(&f, &[vec![0, 1], vec![1, 2]], &mu).is_err());
        let e = conditional_expectation(&f, &[vec![0, 2], vec![1]], &mu).unwrap();
        assert_eq!(e.values(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn differences_telescope() {
        let (sys, mu) = line_system();
        let f = VectorFunction::from_fn(8, 1, |x| vec![(x as f64).sin()]);
        let mut acc = level_expectation(&f, &sys, 0, &mu).unwrap();
        for (_, d) in martingale_differences(&f, &sys, &mu).unwrap() {
            acc.add_assign(&d).unwrap();
        }
        assert!(acc.max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn envelope_uniform() {
        let (sys, mu) = line_system();
        let haar = build_haar_system(&sys, &mu).unwrap();
        let r = haar_envelope_check(&haar, &sys, &mu, 2.0).unwrap();
        assert_relative_eq!(r.max_upper, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.min_lower, 0.5f64.sqrt(), epsilon = 1e-12);
        assert!(r.pass);
    }

    #[test]
    fn norms() {
        let v = [3.0, -4.0];
        assert_eq!(NormedSpace::lq(2, 2.0).unwrap().norm(&v), 5.0);
        assert_eq!(NormedSpace::lq(2, 1.0).unwrap().norm(&v), 7.0);
        assert_eq!(NormedSpace::lq(2, f64::INFINITY).unwrap().norm(&v), 4.0);
        assert_relative_eq!(NormedSpace::lq(2, 3.0).unwrap().norm(&v), 91f64.cbrt(), epsilon = 1e-14);
        assert!(NormedSpace::new(1, 2.0, 2.5, 2.0).is_err());
    }
}
