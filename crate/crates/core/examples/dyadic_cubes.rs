//! Dyadic cubes from nets on a torus grid and on a random cloud, with the
//! inner and outer ball ratios of every cube.

use metric_dyadic::metric::default_level_range;
use metric_dyadic::{build_dyadic_system, build_nested_nets, DyadicSystem, PointCloud};

fn report(name: &str, cloud: &PointCloud, system: &DyadicSystem) {
    let axioms = system.verify_axioms();
    let s = system.verify_sandwich(cloud);
    println!(
        "{name:22} levels {}..={}  cubes {:5}  axioms {}  inner >= {:.3}  outer <= {:.3}",
        system.k_min(),
        system.k_max(),
        axioms.cubes,
        if axioms.passed() { "ok" } else { "FAILED" },
        s.min_inner_ratio,
        s.max_outer_ratio,
    );
}

fn main() -> metric_dyadic::Result<()> {
    for (name, cloud) in [("torus grid, 1024 pts", PointCloud::torus_grid(1024)), ("planar cloud, 300 pts", PointCloud::random_uniform(300, 2, 3))] {
        let (a, b) = default_level_range(&cloud, 0.25)?;
        let system = build_dyadic_system(&cloud, &build_nested_nets(&cloud, 0.25, a, b, None)?)?;
        report(name, &cloud, &system);
    }
    // arcs shifted by a third of their length at every level
    let shifted = DyadicSystem::canonical_torus(1024, 4, 0, 5, 1, 3)?;
    report("shifted torus arcs", &PointCloud::torus_grid(1024), &shifted);
    Ok(())
}
