use metric_dyadic::adjacent::{build_adjacent_family, find_host, verify_host, Ball, FamilyMode};
use metric_dyadic::haar::{build_haar_system, expand, gram_deviation, level_expectation, reconstruct};
use metric_dyadic::metric::{default_level_range, scale};
use metric_dyadic::norms::{kahane_check, randomized_norm, SignEnsemble};
use metric_dyadic::shift::canonical_tau_1d;
use metric_dyadic::sparse::compute_t;
use metric_dyadic::{build_dyadic_system, build_nested_nets, DyadicSystem, Measure, NormedSpace, PointCloud, VectorFunction};
use proptest::prelude::*;

fn planar_cloud() -> impl Strategy<Value = PointCloud> {
    prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 2..60)
        .prop_filter("distinct points", |pts| {
            pts.iter().enumerate().all(|(i, a)| pts[i + 1..].iter().all(|b| (a.0 - b.0).abs() + (a.1 - b.1).abs() > 1e-9))
        })
        .prop_map(|pts| PointCloud::euclidean(&pts.iter().map(|p| vec![p.0, p.1]).collect::<Vec<_>>()).unwrap())
}

fn system_for(cloud: &PointCloud, delta: f64) -> DyadicSystem {
    let (a, b) = default_level_range(cloud, delta).unwrap();
    build_dyadic_system(cloud, &build_nested_nets(cloud, delta, a, b, None).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn metric_axioms_hold(cloud in planar_cloud(), seed in any::<u64>()) {
        prop_assert!(cloud.check_metric(seed).is_ok());
    }

    #[test]
    fn nets_and_cubes_are_valid(cloud in planar_cloud(), di in 0usize..3) {
        let delta = [0.5, 0.25, 0.1][di];
        let (a, b) = default_level_range(&cloud, delta).unwrap();
        let nets = build_nested_nets(&cloud, delta, a, b, None).unwrap();
        prop_assert!(nets.verify(&cloud).passed());
        let system = build_dyadic_system(&cloud, &nets).unwrap();
        prop_assert!(system.verify_axioms().passed());
        prop_assert_eq!(system.level(system.k_min()).len(), 1);
        prop_assert!(system.level(system.k_max()).iter().all(|c| c.members.len() == 1));
    }

    #[test]
    fn haar_round_trip_and_orthonormality(
        cloud in planar_cloud(),
        weights in prop::collection::vec(0.1f64..3.0, 60),
        values in prop::collection::vec(-10.0f64..10.0, 120),
    ) {
        let n = cloud.len();
        let system = system_for(&cloud, 0.5);
        let mu = Measure::new(weights[..n].to_vec()).unwrap();
        let haar = build_haar_system(&system, &mu).unwrap();
        prop_assert!(gram_deviation(&haar, &system, &mu).unwrap() < 1e-10);
        let f = VectorFunction::new(2, values[..2 * n].to_vec()).unwrap();
        let ex = expand(&f, &system, &haar, &mu).unwrap();
        let back = reconstruct(&ex.coefficients, Some(&ex.averages), &system, &haar).unwrap();
        prop_assert!(back.max_abs_diff(&f) < 1e-10);
    }

    #[test]
    fn conditional_expectations_form_a_tower(cloud in planar_cloud(), values in prop::collection::vec(-1.0f64..1.0, 60), i in 0i32..8, j in 0i32..8) {
        let n = cloud.len();
        let system = system_for(&cloud, 0.5);
        let mu = Measure::uniform(n);
        let f = VectorFunction::from_scalar(values[..n].to_vec());
        let span = system.k_max() - system.k_min();
        let (lo, hi) = (system.k_min() + i.min(j) % (span + 1), system.k_min() + i.max(j) % (span + 1));
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let direct = level_expectation(&f, &system, lo, &mu).unwrap();
        let chained = level_expectation(&level_expectation(&f, &system, hi, &mu).unwrap(), &system, lo, &mu).unwrap();
        prop_assert!(direct.max_abs_diff(&chained) < 1e-12);
    }

    #[test]
    fn hosting_is_monotone_in_slack(g in 3u32..8, x in 0usize..256, y in 0usize..256, p in 0u32..3) {
        let n = 1usize << g;
        let cloud = PointCloud::torus_grid(n);
        let family = build_adjacent_family(&cloud, 0.5, 3, FamilyMode::Canonical1d, -(p as i32), g as i32).unwrap();
        let (x, y) = (x % n, y % n);
        prop_assume!(x != y);
        let ball = [Ball::new(x, cloud.dist(x, y))];
        prop_assume!(ball[0].radius >= scale(0.5, g as i32 + 2));
        let mut hosted = false;
        for slack in [1.0, 1.5, 2.0, 4.0, 8.0] {
            let outcome = find_host(&family, &cloud, &ball, p, slack).unwrap();
            if let Some(m) = outcome.found() {
                prop_assert!(verify_host(&family, &cloud, &ball, p, slack, m).unwrap().passed());
            }
            prop_assert!(!hosted || outcome.found().is_some(), "lost the host at slack {}", slack);
            hosted = outcome.found().is_some();
        }
    }

    #[test]
    fn contraction_principle(
        xs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..9),
        cs in prop::collection::vec(-2.0f64..2.0, 9),
        q in prop::sample::select(vec![1.0, 2.0, 4.0, f64::INFINITY]),
        p in prop::sample::select(vec![1.0, 1.5, 2.0, 3.0]),
    ) {
        let e = NormedSpace::lq(3, q).unwrap();
        let check = kahane_check(&xs, &cs[..xs.len()], p, SignEnsemble::Exact, &e).unwrap();
        prop_assert!(check.pass, "{:?}", check);
    }

    #[test]
    fn randomized_norm_is_sign_invariant(values in prop::collection::vec(-1.0f64..1.0, 5 * 8), flip in 0u32..32) {
        let mu = Measure::uniform(8);
        let e = NormedSpace::scalar();
        let fs: Vec<VectorFunction> = values.chunks(8).map(|c| VectorFunction::from_scalar(c.to_vec())).collect();
        let flipped: Vec<VectorFunction> =
            fs.iter().enumerate().map(|(i, f)| if flip >> i & 1 == 1 { f.scaled(-1.0) } else { f.clone() }).collect();
        let a = randomized_norm(&fs, 1.5, SignEnsemble::Exact, &mu, &e).unwrap().value;
        let b = randomized_norm(&flipped, 1.5, SignEnsemble::Exact, &mu, &e).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn t_is_minimal(m in 0.01f64..5000.0, di in 0usize..3) {
        let delta = [0.5, 0.25, 0.1][di];
        let t = compute_t(m, delta).unwrap();
        prop_assert!(2.0 * m * delta.powi(t as i32) <= 1.0);
        prop_assert!(t == 1 || 2.0 * m * delta.powi(t as i32 - 1) > 1.0);
    }

    #[test]
    fn canonical_shift_is_a_level_preserving_bijection(g in 2u32..9, m in 1usize..600) {
        let n = 1usize << g;
        let system = DyadicSystem::canonical_torus(n, 2, 0, g as i32, 0, 1).unwrap();
        let tau = canonical_tau_1d(&system, m).unwrap();
        let inv = tau.inverse();
        for c in system.cubes() {
            let img = tau.apply(c.id()).unwrap();
            prop_assert_eq!(img.level, c.level);
            prop_assert_eq!(inv.apply(img).unwrap(), c.id());
        }
    }
}
