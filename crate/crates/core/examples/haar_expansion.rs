//! Haar expansion of a vector-valued function on a random cloud with a
//! non-uniform measure, and its exact reconstruction.

use metric_dyadic::haar::{build_haar_system, expand, gram_deviation, haar_envelope_check, reconstruct};
use metric_dyadic::metric::default_level_range;
use metric_dyadic::{build_dyadic_system, build_nested_nets, Measure, PointCloud, VectorFunction};

fn main() -> metric_dyadic::Result<()> {
    let cloud = PointCloud::random_uniform(200, 2, 11);
    let (a, b) = default_level_range(&cloud, 0.5)?;
    let system = build_dyadic_system(&cloud, &build_nested_nets(&cloud, 0.5, a, b, None)?)?;
    let mu = Measure::new((0..200).map(|i| 1.0 + (i % 3) as f64).collect())?;
    let haar = build_haar_system(&system, &mu)?;
    println!("{} Haar functions on {} cubes", haar.len(), system.cube_count());
    println!("Gram deviation {:.2e}", gram_deviation(&haar, &system, &mu)?);
    println!("{:?}", haar_envelope_check(&haar, &system, &mu, 8.0)?);

    let f = VectorFunction::from_fn(200, 2, |x| {
        let c = cloud.coordinates(x).unwrap();
        vec![(6.0 * c[0]).sin(), c[0] * c[1]]
    });
    let ex = expand(&f, &system, &haar, &mu)?;
    let back = reconstruct(&ex.coefficients, Some(&ex.averages), &system, &haar)?;
    println!("{} coefficients, reconstruction error {:.2e}", ex.coefficients.len(), back.max_abs_diff(&f));
    Ok(())
}
