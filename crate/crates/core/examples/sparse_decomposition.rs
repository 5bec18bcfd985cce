//! Splits the cubes of a 1024-point torus into sparse families for the
//! shift `Q ↦ Q + m` and checks the hosting, separation and nesting
//! properties of every family.

use metric_dyadic::adjacent::{build_adjacent_family, FamilyMode};
use metric_dyadic::shift::canonical_tau_1d;
use metric_dyadic::sparse::{build_sparse_decomposition, compute_t, verify_decomposition};
use metric_dyadic::{DyadicSystem, PointCloud};

fn main() -> metric_dyadic::Result<()> {
    let (n, base) = (1024, 4);
    let delta = 1.0 / base as f64;
    let cloud = PointCloud::torus_grid(n);
    let system = DyadicSystem::canonical_torus(n, base, 0, 5, 0, 1)?;
    for m in [1usize, 2, 4, 8] {
        let t = compute_t(m as f64, delta)?;
        // hosts live 3 + T levels above the cubes they serve
        let family = build_adjacent_family(&cloud, delta, 3, FamilyMode::Canonical1d, -3 - t as i32, 5)?;
        let tau = canonical_tau_1d(&system, m)?;
        let dec = build_sparse_decomposition(&system, &family, &cloud, &tau)?;
        let report = verify_decomposition(&system, &family, &cloud, &tau, &dec)?;
        println!(
            "m = {m:4}  T = {t}  L = {:4}  families = {:5} (bound {:6})  excluded = {}  nested pairs = {}  {}",
            dec.collections,
            dec.families.len(),
            dec.count_bound(),
            dec.exclusions.len(),
            report.nested_pairs,
            if report.passed() { "ok" } else { "FAILED" },
        );
        if !report.passed() {
            println!("  {report:?}");
        }
    }
    Ok(())
}
