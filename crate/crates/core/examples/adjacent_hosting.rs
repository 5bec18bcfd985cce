//! Three shifted dyadic systems on a torus grid: every ball is caught by a
//! cube of comparable size in at least one of them.

use metric_dyadic::adjacent::{build_adjacent_family, find_host, verify_host, Ball, FamilyMode, HostOutcome};
use metric_dyadic::PointCloud;

fn main() -> metric_dyadic::Result<()> {
    let cloud = PointCloud::torus_grid(256);
    let family = build_adjacent_family(&cloud, 0.5, 3, FamilyMode::Canonical1d, -1, 8)?;
    let mut per_system = [0usize; 3];
    for center in (0..256).step_by(7) {
        for radius in [1.5 / 256.0, 5.0 / 256.0, 0.1, 0.3] {
            let ball = [Ball::new(center, radius)];
            match find_host(&family, &cloud, &ball, 1, 2.0)? {
                HostOutcome::Found(m) => {
                    assert!(verify_host(&family, &cloud, &ball, 1, 2.0, &m)?.passed());
                    per_system[m.omega - 1] += 1;
                }
                HostOutcome::NotFound { diagnostics } => println!("B({center}, {radius}) has no host: {diagnostics:?}"),
            }
        }
    }
    println!("balls hosted first by system 1, 2, 3: {per_system:?}");
    // a ball across the midpoint is split by system 1 at every coarse level
    let straddle = [Ball::new(128, 3.0 / 256.0)];
    println!("B(1/2, 3/256) -> {:?}", find_host(&family, &cloud, &straddle, 1, 1.0)?.omega());
    Ok(())
}
