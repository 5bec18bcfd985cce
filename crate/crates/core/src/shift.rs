//! Cube maps `τ`, the induced shift `h_Q ↦ h_{τ(Q)}` on Haar coefficients,
//! and the norm growth experiment for torus shifts.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubes::DyadicSystem;
use crate::error::{invalid, Error, Result};
use crate::haar::{build_haar_system, expand, reconstruct, HaarCoefficients, HaarIndex, HaarSystem, NormedSpace, VectorFunction};
use crate::metric::{Measure, PointCloud};
use crate::norms::{alpha_exponent, bochner_norm, randomized_norm, Estimate, SignEnsemble};
use crate::sparse::TauMap;

/// `τ(Q_j^k) = Q_{(j + m) mod b^k}` on a canonical torus system. The stored
/// dilation is `m`.
pub fn canonical_tau_1d(system: &DyadicSystem, m: usize) -> Result<TauMap> {
    let layout = system.layout().ok_or(Error::NotCanonical)?;
    if m == 0 {
        return Err(invalid("shift m must be at least 1"));
    }
    let images = (system.k_min()..=system.k_max())
        .map(|k| {
            let n = layout.cubes_at(k);
            (0..n).map(|j| (j + m) % n).collect()
        })
        .collect();
    TauMap::new(system, images, m as f64, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RandomTau {
    pub tau: TauMap,
    /// Levels where no admissible perfect matching exists; `τ` is the
    /// identity there.
    pub identity_levels: Vec<i32>,
}

/// Seeded random matching of each level onto itself with `τ(Q) ⊆ mB_Q` and
/// `μ(Q)/c_τ <= μ(τQ) <= c_τ μ(Q)`.
pub fn random_tau(system: &DyadicSystem, cloud: &PointCloud, mu: &Measure, m: f64, c_tau: f64, seed: u64) -> Result<RandomTau> {
    if !(m >= 1.0 && m.is_finite()) {
        return Err(invalid(format!("dilation must be >= 1, got {m}")));
    }
    if !(c_tau >= 1.0 && c_tau.is_finite()) {
        return Err(invalid(format!("measure constant must be >= 1, got {c_tau}")));
    }
    let mut images = Vec::new();
    let mut identity_levels = Vec::new();
    for (li, (k, cubes)) in system.levels().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(li as u64);
        let r = m * system.ball_radius(k);
        let masses: Vec<f64> = cubes.iter().map(|c| mu.mass(&c.members)).collect();
        let tol = 1.0 + 1e-12;
        let mut adj: Vec<Vec<usize>> = cubes
            .iter()
            .enumerate()
            .map(|(q, c)| {
                (0..cubes.len())
                    .filter(|&t| {
                        masses[q] <= c_tau * masses[t] * tol
                            && masses[t] <= c_tau * masses[q] * tol
                            && cubes[t].members.iter().all(|&y| cloud.dist(c.center, y) < r)
                    })
                    .collect()
            })
            .collect();
        for a in &mut adj {
            a.shuffle(&mut rng);
        }
        let mut order: Vec<usize> = (0..cubes.len()).collect();
        order.shuffle(&mut rng);
        match perfect_matching(&adj, &order) {
            Some(img) => images.push(img),
            None => {
                identity_levels.push(k);
                images.push((0..cubes.len()).collect());
            }
        }
    }
    Ok(RandomTau { tau: TauMap::new(system, images, m, c_tau)?, identity_levels })
}

/// Kuhn's augmenting paths; `None` when some vertex stays unmatched.
fn perfect_matching(adj: &[Vec<usize>], order: &[usize]) -> Option<Vec<usize>> {
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [usize]) -> bool {
        for &t in &adj[u] {
            if std::mem::replace(&mut seen[t], true) {
                continue;
            }
            if owner[t] == usize::MAX || augment(owner[t], adj, seen, owner) {
                owner[t] = u;
                return true;
            }
        }
        false
    }
    let n = adj.len();
    let mut owner = vec![usize::MAX; n];
    for &u in order {
        let mut seen = vec![false; n];
        if !augment(u, adj, &mut seen, &mut owner) {
            return None;
        }
    }
    let mut img = vec![0; n];
    for (t, &u) in owner.iter().enumerate() {
        img[u] = t;
    }
    Some(img)
}

/// The linear map `h_Q^θ ↦ h_{τ(Q)}^θ`, defined on cubes where both `Q`
/// and `τ(Q)` carry branch `θ`. Top-level averages pass through unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftOperator {
    pub tau: TauMap,
}

impl ShiftOperator {
    pub fn new(tau: TauMap) -> Self {
        Self { tau }
    }

    pub fn in_domain(&self, idx: HaarIndex, haar: &HaarSystem) -> bool {
        haar.get(idx.cube, idx.branch).is_some()
            && self.tau.apply(idx.cube).is_ok_and(|t| haar.get(t, idx.branch).is_some())
    }

    pub fn inverse(&self) -> Self {
        Self { tau: self.tau.inverse() }
    }
}

/// Moves every coefficient from `Q` to `τ(Q)`.
pub fn apply_shift(op: &ShiftOperator, coeffs: &HaarCoefficients, haar: &HaarSystem) -> Result<HaarCoefficients> {
    let mut out = HaarCoefficients::new(coeffs.dim);
    for (idx, x) in &coeffs.coeffs {
        if !op.in_domain(*idx, haar) {
            return Err(Error::OutsideDomain(idx.cube));
        }
        out.coeffs.insert(HaarIndex::new(op.tau.apply(idx.cube)?, idx.branch), x.clone());
    }
    Ok(out)
}

/// `T f` for a function on the points: expand, shift, reconstruct.
pub fn shift_function(op: &ShiftOperator, f: &VectorFunction, system: &DyadicSystem, haar: &HaarSystem, mu: &Measure) -> Result<VectorFunction> {
    let e = expand(f, system, haar, mu)?;
    let shifted = apply_shift(op, &e.coefficients, haar)?;
    reconstruct(&shifted, Some(&e.averages), system, haar)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HaarRandomRatio {
    /// `‖Σ x_Q h_Q‖_p`.
    pub haar_side: f64,
    /// `‖Σ ε_Q x_Q 1_Q / μ(Q)^{1/2}‖_p`.
    pub random_side: Estimate,
    /// `haar_side / random_side`, 1 for the empty sum.
    pub ratio: f64,
}

/// Compares the Haar sum with the randomized sum of normalized indicators.
pub fn haar_random_ratio(
    coeffs: &HaarCoefficients,
    system: &DyadicSystem,
    haar: &HaarSystem,
    p: f64,
    ens: SignEnsemble,
    mu: &Measure,
    e: &NormedSpace,
) -> Result<HaarRandomRatio> {
    if coeffs.dim != e.dim {
        return Err(Error::DimensionMismatch { expected: e.dim, got: coeffs.dim });
    }
    let f = reconstruct(coeffs, None, system, haar)?;
    let haar_side = bochner_norm(&f, p, mu, e)?;
    let mut summands = Vec::with_capacity(coeffs.len());
    for (idx, x) in &coeffs.coeffs {
        let q = system.cube(idx.cube)?;
        let s = 1.0 / mu.mass(&q.members).sqrt();
        let mut g = VectorFunction::zeros(system.n_points(), e.dim);
        for &y in &q.members {
            g.value_mut(y).iter_mut().zip(x).for_each(|(v, c)| *v = c * s);
        }
        summands.push(g);
    }
    let random_side = randomized_norm(&summands, p, ens, mu, e)?;
    let ratio = if random_side.value == 0.0 && haar_side == 0.0 { 1.0 } else { haar_side / random_side.value };
    Ok(HaarRandomRatio { haar_side, random_side, ratio })
}

/// Settings of [`norm_growth_experiment`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Torus grid of `2^g` points.
    pub g: u32,
    /// `δ = 1 / base`; `base` must be a power of two whose exponent divides `g`.
    pub base: usize,
    pub p_list: Vec<f64>,
    pub m_list: Vec<usize>,
    pub space: NormedSpace,
    pub samples: usize,
    pub seed: u64,
    /// Fit the constant over `m <= fit_m_max` only.
    #[serde(default)]
    pub fit_m_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub m: usize,
    pub p: f64,
    pub q_e: f64,
    pub d: usize,
    /// Largest sampled `‖Tf‖_p / ‖f‖_p`.
    pub ratio: f64,
    /// `(ln(2m) + 1)^α`.
    pub bound: f64,
    /// Least `C` with `ratio <= C · bound` over the fitted `m` range, per `p`.
    pub fit_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub rows: Vec<ExperimentRow>,
    /// Spearman correlation of the ratio against `ln(2m)`, per `p`.
    pub spearman: Vec<(f64, f64)>,
}

impl ExperimentReport {
    /// CSV with header `m,p,q_E,d,ratio,bound,fitC`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,p,q_E,d,ratio,bound,fitC\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{:.12e},{:.12e},{:.12e}\n", r.m, r.p, r.q_e, r.d, r.ratio, r.bound, r.fit_c));
        }
        out
    }
}

/// Least `C` with `ratio <= C · bound` over rows with the given `p` and `m <= m_max`.
pub fn fit_constant(rows: &[ExperimentRow], p: f64, m_max: usize) -> f64 {
    rows.iter().filter(|r| r.p == p && r.m <= m_max).map(|r| r.ratio / r.bound).fold(0.0, f64::max)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            r[t] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Coefficient pattern of sample `s`: random dense, sparse, single cube,
/// level-constant, alternating, or a band of levels.
fn sample_coefficients(system: &DyadicSystem, haar: &HaarSystem, dim: usize, seed: u64, s: usize) -> HaarCoefficients {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s as u64);
    let gauss = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..dim).map(|_| rng.sample(StandardNormal)).collect() };
    let levels: Vec<i32> = (system.k_min()..system.k_max()).collect();
    let mut c = HaarCoefficients::new(dim);
    let all: Vec<HaarIndex> = haar.functions().map(|h| HaarIndex::new(h.cube, h.branch)).collect();
    match s % 6 {
        0 => {
            let decay: f64 = rng.gen_range(0.3..1.0);
            for idx in &all {
                let w = decay.powi(idx.cube.level - system.k_min());
                let x = gauss(&mut rng).into_iter().map(|v| v * w).collect();
                c.coeffs.insert(*idx, x);
            }
        }
        1 => {
            let count = rng.gen_range(1..=16).min(all.len());
            for idx in all.choose_multiple(&mut rng, count) {
                c.coeffs.insert(*idx, gauss(&mut rng));
            }
        }
        2 => {
            let idx = all[rng.gen_range(0..all.len())];
            c.coeffs.insert(idx, gauss(&mut rng));
        }
        3 | 4 => {
            let k = levels[rng.gen_range(0..levels.len())];
            let x = gauss(&mut rng);
            let alternate = s % 6 == 4;
            for idx in all.iter().filter(|i| i.cube.level == k) {
                let sign = if alternate && idx.cube.index % 2 == 1 { -1.0 } else { 1.0 };
                c.coeffs.insert(*idx, x.iter().map(|v| v * sign).collect());
            }
        }
        _ => {
            let lo = levels[rng.gen_range(0..levels.len())];
            let hi = (lo + 2).min(*levels.last().expect("levels"));
            for idx in all.iter().filter(|i| (lo..=hi).contains(&i.cube.level)) {
                c.coeffs.insert(*idx, gauss(&mut rng));
            }
        }
    }
    c
}

/// Samples coefficient sets on the torus grid of `2^g` points and records,
/// for every `(m, p)`, the largest ratio `‖T_m f‖_p / ‖f‖_p` with `T_m` the
/// canonical shift by `m`.
pub fn norm_growth_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let ExperimentConfig { g, base, ref p_list, ref m_list, space, samples, seed, fit_m_max } = *config;
    if g == 0 || g > 12 {
        return Err(invalid(format!("grid exponent g must lie in 1..=12, got {g}")));
    }
    if base < 2 || !base.is_power_of_two() || g % base.trailing_zeros() != 0 {
        return Err(invalid(format!("base {base} must be a power of two whose exponent divides g = {g}")));
    }
    if p_list.is_empty() || m_list.is_empty() || samples == 0 {
        return Err(invalid("experiment needs p values, m values and samples"));
    }
    if let Some(&p) = p_list.iter().find(|&&p| !(p > 1.0 && p.is_finite())) {
        return Err(invalid(format!("exponent {p} outside (1, ∞)")));
    }
    if m_list.contains(&0) {
        return Err(invalid("shift m must be at least 1"));
    }
    let n = 1usize << g;
    let k_max = (g / base.trailing_zeros()) as i32;
    let system = DyadicSystem::canonical_torus(n, base, 0, k_max, 0, 1)?;
    let mu = Measure::uniform(n);
    let haar = build_haar_system(&system, &mu)?;
    let ops: Vec<ShiftOperator> = m_list.iter().map(|&m| canonical_tau_1d(&system, m).map(ShiftOperator::new)).collect::<Result<_>>()?;
    let alphas: Vec<f64> = p_list.iter().map(|&p| alpha_exponent(space.type_t, space.cotype_q, p)).collect::<Result<_>>()?;
    // per sample: ratio for every (m, p), m-major
    let per_sample: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| -> Result<Vec<f64>> {
            let c = sample_coefficients(&system, &haar, space.dim, seed, s);
            let f = reconstruct(&c, None, &system, &haar)?;
            let base_norms: Vec<f64> = p_list.iter().map(|&p| bochner_norm(&f, p, &mu, &space)).collect::<Result<_>>()?;
            let mut out = Vec::with_capacity(ops.len() * p_list.len());
            for op in &ops {
                let tf = reconstruct(&apply_shift(op, &c, &haar)?, None, &system, &haar)?;
                for (&p, &b) in p_list.iter().zip(&base_norms) {
                    let t = bochner_norm(&tf, p, &mu, &space)?;
                    out.push(if b > 0.0 { t / b } else { 1.0 });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let np = p_list.len();
    let mut rows = Vec::new();
    for (mi, &m) in m_list.iter().enumerate() {
        for (pi, &p) in p_list.iter().enumerate() {
            let ratio = per_sample.iter().map(|r| r[mi * np + pi]).fold(0.0, f64::max);
            let bound = ((2.0 * m as f64).ln() + 1.0).powf(alphas[pi]);
            rows.push(ExperimentRow { m, p, q_e: space.q, d: space.dim, ratio, bound, fit_c: 0.0 });
        }
    }
    let m_cap = fit_m_max.unwrap_or(usize::MAX);
    let mut spearman_by_p = Vec::new();
    for &p in p_list {
        let c = fit_constant(&rows, p, m_cap);
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.p == p).map(|r| ((2.0 * r.m as f64).ln(), r.ratio)).unzip();
        spearman_by_p.push((p, spearman(&xs, &ys)));
        rows.iter_mut().filter(|r| r.p == p).for_each(|r| r.fit_c = c);
    }
    Ok(ExperimentReport { config: config.clone(), rows, spearman: spearman_by_p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubes::CubeId;
    use approx::assert_relative_eq;

    fn torus(n: usize, k_max: i32) -> (PointCloud, DyadicSystem, Measure) {
        (PointCloud::torus_grid(n), DyadicSystem::canonical_torus(n, 2, 0, k_max, 0, 1).unwrap(), Measure::uniform(n))
    }

    #[test]
    fn unit_shift_cycles_level_two() {
        let (cloud, sys, mu) = torus(16, 4);
        let tau = canonical_tau_1d(&sys, 1).unwrap();
        let cycle: Vec<usize> = (0..4).map(|j| tau.apply(CubeId::new(2, j)).unwrap().index).collect();
        assert_eq!(cycle, vec![1, 2, 3, 0]);
        assert!(tau.verify_admissible(&sys, &cloud, &mu).passed());
    }

    #[test]
    fn full_wrap_is_identity_on_level() {
        let (_, sys, _) = torus(16, 4);
        let tau = canonical_tau_1d(&sys, 4).unwrap();
        for j in 0..4 {
            assert_eq!(tau.apply(CubeId::new(2, j)).unwrap().index, j);
        }
        assert!(canonical_tau_1d(&sys, 0).is_err());
        let line = crate::metric::build_nested_nets(&PointCloud::line_grid(8), 0.5, 0, 3, None).unwrap();
        let line = crate::cubes::build_dyadic_system(&PointCloud::line_grid(8), &line).unwrap();
        assert!(matches!(canonical_tau_1d(&line, 1), Err(Error::NotCanonical)));
    }

    #[test]
    fn random_tau_is_seeded_and_admissible() {
        let (cloud, sys, mu) = torus(32, 5);
        let a = random_tau(&sys, &cloud, &mu, 2.0, 1.0, 5).unwrap();
        let b = random_tau(&sys, &cloud, &mu, 2.0, 1.0, 5).unwrap();
        assert_eq!(a, b);
        assert!(a.identity_levels.is_empty());
        assert!(a.tau.verify_admissible(&sys, &cloud, &mu).passed());
        assert!(!a.tau.is_identity());
    }

    #[test]
    fn matching_failure_falls_back() {
        // a 3-cycle of allowed moves on 3 vertices where one vertex has no option
        assert!(perfect_matching(&[vec![1], vec![1], vec![0, 2]], &[0, 1, 2]).is_none());
        assert_eq!(perfect_matching(&[vec![1], vec![2], vec![0]], &[0, 1, 2]), Some(vec![1, 2, 0]));
    }

    #[test]
    fn shift_and_inverse() {
        let (_, sys, mu) = torus(16, 4);
        let haar = build_haar_system(&sys, &mu).unwrap();
        let op = ShiftOperator::new(canonical_tau_1d(&sys, 3).unwrap());
        let mut c = HaarCoefficients::new(1);
        c.insert(HaarIndex::new(CubeId::new(2, 1), 1), vec![2.5]).unwrap();
        let t = apply_shift(&op, &c, &haar).unwrap();
        assert_eq!(t.coeffs.keys().next().unwrap().cube, CubeId::new(2, 0));
        assert_eq!(apply_shift(&op.inverse(), &t, &haar).unwrap(), c);
        let mut bad = HaarCoefficients::new(1);
        bad.insert(HaarIndex::new(CubeId::new(4, 0), 1), vec![1.0]).unwrap();
        assert!(matches!(apply_shift(&op, &bad, &haar), Err(Error::OutsideDomain(_))));
    }

    #[test]
    fn single_cube_ratio_is_one() {
        let (_, sys, mu) = torus(16, 4);
        let haar = build_haar_system(&sys, &mu).unwrap();
        let mut c = HaarCoefficients::new(1);
        c.insert(HaarIndex::new(CubeId::new(1, 0), 1), vec![1.0]).unwrap();
        let r = haar_random_ratio(&c, &sys, &haar, 2.0, SignEnsemble::Exact, &mu, &NormedSpace::scalar()).unwrap();
        assert_relative_eq!(r.haar_side, 1.0, epsilon = 1e-14);
        assert_relative_eq!(r.ratio, 1.0, epsilon = 1e-14);
        let empty = HaarCoefficients::new(1);
        let r = haar_random_ratio(&empty, &sys, &haar, 3.0, SignEnsemble::Exact, &mu, &NormedSpace::scalar()).unwrap();
        assert_eq!(r.ratio, 1.0);
    }

    #[test]
    fn spearman_basics() {
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[2.0, 5.0, 9.0]), 1.0);
        assert_relative_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn small_experiment() {
        let cfg = ExperimentConfig {
            g: 6,
            base: 2,
            p_list: vec![2.0, 4.0],
            m_list: vec![1, 2, 4],
            space: NormedSpace::scalar(),
            samples: 30,
            seed: 1,
            fit_m_max: None,
        };
        let r = norm_growth_experiment(&cfg).unwrap();
        assert_eq!(r.rows.len(), 6);
        for row in r.rows.iter().filter(|r| r.p == 2.0) {
            assert!((row.ratio - 1.0).abs() < 1e-10);
        }
        for row in r.rows.iter().filter(|r| r.p == 4.0) {
            assert!(row.ratio >= 1.0 - 1e-12 && row.ratio.is_finite());
        }
        // more samples can only raise the maxima
        let more = norm_growth_experiment(&ExperimentConfig { samples: 60, ..cfg }).unwrap();
        for (a, b) in r.rows.iter().zip(&more.rows) {
            assert!(b.ratio >= a.ratio);
        }
    }
}
