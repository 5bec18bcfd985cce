//! Library results against brute-force recomputations that share no code
//! with the implementation beyond the point clouds.

use metric_dyadic::adjacent::{
    build_adjacent_family, find_host, host_pair_for_cubes, AdjacentFamily, Ball, FamilyMode, HostOutcome,
};
use metric_dyadic::haar::{build_haar_system, expand, reconstruct, HaarCoefficients, HaarIndex};
use metric_dyadic::metric::{greedy_maximal_separated, scale};
use metric_dyadic::norms::{bochner_norm, randomized_norm, SignEnsemble};
use metric_dyadic::shift::{apply_shift, canonical_tau_1d, shift_function, ShiftOperator};
use metric_dyadic::{
    build_dyadic_system, build_nested_nets, CubeId, DyadicSystem, Measure, NormedSpace, PointCloud, VectorFunction,
};
use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lq(v: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        v.iter().map(|x| x.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

fn random_function(r: &mut ChaCha8Rng, n: usize, dim: usize) -> VectorFunction {
    VectorFunction::from_fn(n, dim, |_| (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect())
}

#[test]
fn greedy_nets_are_separated_and_maximal() {
    let cloud = PointCloud::random_uniform(300, 2, 9);
    for delta in [0.05, 0.1, 0.3] {
        let net = greedy_maximal_separated(&cloud, delta, None).unwrap();
        for (i, &a) in net.members.iter().enumerate() {
            for &b in &net.members[i + 1..] {
                assert!(cloud.dist(a, b) >= delta);
            }
        }
        for x in 0..cloud.len() {
            assert!(net.members.iter().any(|&a| cloud.dist(x, a) < delta), "point {x} is far from the net");
        }
    }
}

#[test]
fn cubes_partition_and_nest_by_direct_inspection() {
    let cloud = PointCloud::random_uniform(150, 2, 2);
    let nets = build_nested_nets(&cloud, 0.25, 0, 4, None).unwrap();
    let system = build_dyadic_system(&cloud, &nets).unwrap();
    for (k, cubes) in system.levels() {
        let mut owner = vec![None; cloud.len()];
        for c in cubes {
            for &y in &c.members {
                assert!(owner[y].replace(c.index).is_none(), "point {y} in two cubes at level {k}");
            }
        }
        assert!(owner.iter().all(Option::is_some));
        if k > system.k_min() {
            for c in cubes {
                let parent = system.cube(CubeId::new(k - 1, c.parent.unwrap())).unwrap();
                assert!(c.members.iter().all(|y| parent.contains(*y)));
            }
        }
    }
}

#[test]
fn canonical_family_on_sixteen_points_is_three_valid_shifted_grids() {
    let cloud = PointCloud::torus_grid(16);
    let family = build_adjacent_family(&cloud, 0.5, 3, FamilyMode::Canonical1d, 0, 4).unwrap();
    assert_eq!(family.len(), 3);
    let mut partitions = Vec::new();
    for w in 1..=3 {
        let s = family.system(w).unwrap();
        assert!(s.verify_axioms().passed());
        // every cube at level 2 is an arc of four consecutive points
        for c in s.level(2) {
            assert_eq!(c.members.len(), 4);
        }
        partitions.push(s.level(2).iter().map(|c| c.members.clone()).collect::<BTreeSet<_>>());
    }
    assert!(partitions[0] != partitions[1] && partitions[1] != partitions[2] && partitions[0] != partitions[2]);
}

#[test]
fn random_family_is_reproducible() {
    let cloud = PointCloud::random_uniform(80, 2, 4);
    let a = build_adjacent_family(&cloud, 0.5, 4, FamilyMode::Random { seed: 3 }, -1, 5).unwrap();
    let b = build_adjacent_family(&cloud, 0.5, 4, FamilyMode::Random { seed: 3 }, -1, 5).unwrap();
    assert_eq!(a.len(), 4);
    assert!(a.systems().iter().all(|s| s.verify_axioms().passed()));
    assert_eq!(a.to_export(), b.to_export());
}

/// Smallest `ω` with some cube satisfying all three hosting conditions,
/// found by scanning every cube of every system.
fn brute_force_host(family: &AdjacentFamily, cloud: &PointCloud, ball: Ball, p: u32, slack: f64) -> Option<usize> {
    let inside = cloud.ball(ball.center, ball.radius);
    let delta = family.delta();
    let dilated = cloud.ball(ball.center, ball.radius / delta.powi(p as i32));
    (1..=family.len()).find(|&w| {
        let s = family.system(w).unwrap();
        s.cubes().any(|q| {
            q.level - p as i32 >= s.k_min()
                && scale(delta, q.level) <= slack * ball.radius / (delta * delta) * (1.0 + 1e-12)
                && inside.iter().all(|y| q.contains(*y))
                && {
                    let a = s.ancestor(q.id(), p).unwrap();
                    let a = s.cube(a).unwrap();
                    dilated.iter().all(|y| a.contains(*y))
                }
        })
    })
}

#[test]
fn find_host_agrees_with_exhaustive_search() {
    let mut r = ChaCha8Rng::seed_from_u64(21);
    for (n, mode) in [(64, FamilyMode::Canonical1d), (128, FamilyMode::Canonical1d), (64, FamilyMode::Random { seed: 1 })] {
        let cloud = PointCloud::torus_grid(n);
        let k_max = n.trailing_zeros() as i32;
        let family = build_adjacent_family(&cloud, 0.5, 3, mode, -2, k_max).unwrap();
        for _ in 0..150 {
            let (x, y) = (r.gen_range(0..n), r.gen_range(0..n));
            let radius = cloud.dist(x, y).max(1.0 / n as f64);
            let p = r.gen_range(0..3);
            let slack = [1.0, 2.0, 4.0][r.gen_range(0..3)];
            let ball = Ball::new(x, radius);
            let got = find_host(&family, &cloud, &[ball], p, slack).unwrap().omega();
            assert_eq!(got, brute_force_host(&family, &cloud, ball, p, slack), "ball {ball:?} p {p} slack {slack}");
        }
    }
}

#[test]
fn inner_ball_of_a_cube_is_hosted_by_its_system() {
    // the size condition δ^k <= δ^{-2} δ^k / 5 needs δ <= 1/√5
    let cloud = PointCloud::torus_grid(256);
    let system = DyadicSystem::canonical_torus(256, 4, 0, 4, 0, 1).unwrap();
    let family = AdjacentFamily::from_systems(vec![system.clone()], FamilyMode::Canonical1d).unwrap();
    for c in system.level(2) {
        let ball = Ball::new(c.center, scale(0.25, 2) / 5.0);
        let found = find_host(&family, &cloud, &[ball], 0, 1.0).unwrap();
        assert_eq!(found.omega(), Some(1));
    }
}

#[test]
fn balls_far_inside_one_system_share_it() {
    let cloud = PointCloud::torus_grid(64);
    let family = build_adjacent_family(&cloud, 0.5, 3, FamilyMode::Canonical1d, -1, 6).unwrap();
    let s = family.system(1).unwrap();
    let (a, b) = (&s.level(2)[0], &s.level(2)[2]);
    let balls = [Ball::new(a.center, 1.0 / 64.0), Ball::new(b.center, 1.0 / 64.0)];
    let HostOutcome::Found(m) = find_host(&family, &cloud, &balls, 0, 4.0).unwrap() else { panic!("no host") };
    assert_eq!(m.cubes.len(), 2);
    assert_eq!(Some(m.omega), brute_force_host(&family, &cloud, balls[0], 0, 4.0).max(brute_force_host(&family, &cloud, balls[1], 0, 4.0)));
}

#[test]
fn ball_across_a_first_system_boundary_is_hosted_by_a_shifted_one() {
    let cloud = PointCloud::torus_grid(64);
    let family = build_adjacent_family(&cloud, 0.5, 3, FamilyMode::Canonical1d, -1, 6).unwrap();
    // points 31 and 32 lie in different level-1 cubes of the unshifted grid
    let ball = Ball::new(32, 2.5 / 64.0);
    let omega = find_host(&family, &cloud, &[ball], 1, 1.0).unwrap().omega();
    assert!(matches!(omega, Some(2) | Some(3)), "{omega:?}");
    assert_eq!(omega, brute_force_host(&family, &cloud, ball, 1, 1.0));
}

#[test]
fn host_pairs_contain_their_balls() {
    let cloud = PointCloud::torus_grid(256);
    let base = DyadicSystem::canonical_torus(256, 2, 0, 8, 0, 1).unwrap();
    let family = build_adjacent_family(&cloud, 0.5, 3, FamilyMode::Canonical1d, -4, 8).unwrap();
    let q1 = CubeId::new(5, 3);
    for q2 in [q1, CubeId::new(5, 4), CubeId::new(5, 20)] {
        let Some(h) = host_pair_for_cubes(&family, &cloud, &base, q1, q2, 1.0).unwrap().found().copied() else {
            continue;
        };
        let s = family.system(h.omega).unwrap();
        let r = base.ball_radius(5);
        let (c1, c2) = (base.cube(q1).unwrap().center, base.cube(q2).unwrap().center);
        assert!(cloud.ball(c1, r).iter().all(|&y| s.cube(h.p1).unwrap().contains(y)));
        assert!(cloud.ball(c2, r).iter().all(|&y| s.cube(h.p2).unwrap().contains(y)));
        assert!(cloud.ball(c1, 2.0 * r).iter().all(|&y| s.cube(h.pstar).unwrap().contains(y)));
        assert_eq!(h.p1.level, 2);
        if q1 == q2 {
            assert_eq!(h.p1, h.p2);
        }
    }
    assert!(host_pair_for_cubes(&family, &cloud, &base, CubeId::new(2, 0), CubeId::new(2, 1), 64.0).is_err());
}

#[test]
fn haar_functions_are_orthonormal_as_dense_vectors() {
    let cloud = PointCloud::random_uniform(90, 2, 6);
    let nets = build_nested_nets(&cloud, 0.5, 0, 6, None).unwrap();
    let system = build_dyadic_system(&cloud, &nets).unwrap();
    let mu = Measure::new((0..90).map(|i| 0.5 + (i % 5) as f64).collect()).unwrap();
    let haar = build_haar_system(&system, &mu).unwrap();
    let dense: Vec<Vec<f64>> =
        haar.functions().map(|h| haar.dense(&system, h.cube, h.branch).unwrap()).collect();
    let dot = |a: &[f64], b: &[f64]| (0..90).map(|x| mu.weight(x) * a[x] * b[x]).sum::<f64>();
    for (i, a) in dense.iter().enumerate() {
        assert!(dot(a, &vec![1.0; 90]).abs() < 1e-12);
        for (j, b) in dense.iter().enumerate() {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dot(a, b) - expected).abs() < 1e-10, "<h{i}, h{j}> = {}", dot(a, b));
        }
    }
}

#[test]
fn expansion_matches_inner_products() {
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let system = DyadicSystem::canonical_torus(27, 3, 0, 3, 0, 1).unwrap();
    let mu = Measure::uniform(27);
    let haar = build_haar_system(&system, &mu).unwrap();
    let f = random_function(&mut r, 27, 2);
    let ex = expand(&f, &system, &haar, &mu).unwrap();
    for h in haar.functions() {
        let d = haar.dense(&system, h.cube, h.branch).unwrap();
        let got = &ex.coefficients.coeffs[&HaarIndex::new(h.cube, h.branch)];
        for (c, g) in got.iter().enumerate() {
            let want: f64 = (0..27).map(|x| mu.weight(x) * d[x] * f.value(x)[c]).sum();
            assert!((g - want).abs() < 1e-12);
        }
    }
}

#[test]
fn norms_match_direct_enumeration() {
    let mut r = ChaCha8Rng::seed_from_u64(10);
    for q in [1.0, 2.0, 3.0, f64::INFINITY] {
        let e = NormedSpace::lq(3, q).unwrap();
        let n = 12;
        let mu = Measure::new((0..n).map(|_| r.gen_range(0.1..1.0)).collect()).unwrap();
        let fs: Vec<VectorFunction> = (0..7).map(|_| random_function(&mut r, n, 3)).collect();
        for p in [1.0, 1.5, 2.0, 4.0] {
            let direct_bochner =
                (0..n).map(|x| mu.weight(x) * lq(fs[0].value(x), q).powf(p)).sum::<f64>().powf(1.0 / p);
            assert!((bochner_norm(&fs[0], p, &mu, &e).unwrap() - direct_bochner).abs() < 1e-12);
            let mut total = 0.0;
            for signs in 0u32..(1 << fs.len()) {
                for x in 0..n {
                    let mut v = [0.0; 3];
                    for (i, f) in fs.iter().enumerate() {
                        let s = if signs >> i & 1 == 1 { -1.0 } else { 1.0 };
                        v.iter_mut().zip(f.value(x)).for_each(|(a, b)| *a += s * b);
                    }
                    total += mu.weight(x) * lq(&v, q).powf(p);
                }
            }
            let direct = (total / (1u32 << fs.len()) as f64).powf(1.0 / p);
            let exact = randomized_norm(&fs, p, SignEnsemble::Exact, &mu, &e).unwrap();
            assert!((exact.value - direct).abs() < 1e-12 * direct.max(1.0), "q {q} p {p}");
            let mc = randomized_norm(&fs, p, SignEnsemble::MonteCarlo { trials: 4000, seed: 1 }, &mu, &e).unwrap();
            assert!((mc.value - direct).abs() < 5.0 * mc.stderr.unwrap() + 1e-12, "q {q} p {p}: {mc:?} vs {direct}");
        }
    }
}

#[test]
fn canonical_shift_moves_cubes_along_the_torus() {
    let cloud = PointCloud::torus_grid(64);
    let system = DyadicSystem::canonical_torus(64, 2, 0, 6, 0, 1).unwrap();
    let mu = Measure::uniform(64);
    let haar = build_haar_system(&system, &mu).unwrap();
    for m in [1usize, 3, 5] {
        let tau = canonical_tau_1d(&system, m).unwrap();
        for (k, cubes) in system.levels() {
            for c in cubes {
                let img = system.cube(tau.apply(c.id()).unwrap()).unwrap();
                // translation by m cube widths
                let width = 64 >> k;
                let shifted: Vec<usize> = c.members.iter().map(|y| (y + m * width) % 64).collect();
                assert!(shifted.iter().all(|y| img.contains(*y)));
            }
        }
        let op = ShiftOperator::new(tau);
        let mut r = ChaCha8Rng::seed_from_u64(m as u64);
        let f = random_function(&mut r, 64, 1);
        let ex = expand(&f, &system, &haar, &mu).unwrap();
        let via_coeffs = reconstruct(&apply_shift(&op, &ex.coefficients, &haar).unwrap(), Some(&ex.averages), &system, &haar).unwrap();
        let direct = shift_function(&op, &f, &system, &haar, &mu).unwrap();
        assert!(via_coeffs.max_abs_diff(&direct) < 1e-12);
        let back = shift_function(&op.inverse(), &direct, &system, &haar, &mu).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-12);
        let l2 = |g: &VectorFunction| bochner_norm(g, 2.0, &mu, &NormedSpace::scalar()).unwrap();
        assert!((l2(&direct) - l2(&f)).abs() < 1e-12);
        let _ = &cloud;
    }
}

#[test]
fn empty_coefficients_reconstruct_to_zero() {
    let system = DyadicSystem::canonical_torus(8, 2, 0, 3, 0, 1).unwrap();
    let haar = build_haar_system(&system, &Measure::uniform(8)).unwrap();
    let f = reconstruct(&HaarCoefficients::new(2), None, &system, &haar).unwrap();
    assert_eq!(f.values(), &[0.0; 16]);
}
