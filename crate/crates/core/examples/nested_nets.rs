//! Greedy nested nets on a random planar cloud, with the doubling constant
//! estimated from the data.

use metric_dyadic::metric::{default_level_range, estimate_doubling_constant};
use metric_dyadic::{build_nested_nets, PointCloud};

fn main() -> metric_dyadic::Result<()> {
    let cloud = PointCloud::random_uniform(400, 2, 7);
    let delta = 0.25;
    let (k_min, k_max) = default_level_range(&cloud, delta)?;
    let nets = build_nested_nets(&cloud, delta, k_min, k_max, None)?;
    for (k, net) in nets.levels() {
        println!("level {k:3}  separation {:.6}  points {:4}", net.separation, net.len());
    }
    let report = nets.verify(&cloud);
    println!("separated, maximal and nested: {}", report.passed());
    let m = estimate_doubling_constant(&cloud, 1);
    println!("doubling constant estimate: {m:?}");
    Ok(())
}
