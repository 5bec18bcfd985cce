//! Rademacher-randomized norms, exact and sampled, with the contraction
//! principle and the conditional-expectation inequality.

use metric_dyadic::haar::level_expectation;
use metric_dyadic::norms::{kahane_check, randomized_norm, stein_check, SignEnsemble};
use metric_dyadic::{DyadicSystem, Measure, NormedSpace, VectorFunction};

fn main() -> metric_dyadic::Result<()> {
    let e = NormedSpace::lq(2, 4.0)?;
    let mu = Measure::uniform(64);
    let fs: Vec<VectorFunction> =
        (0..12).map(|i| VectorFunction::from_fn(64, 2, |x| vec![((x * (i + 1)) as f64).sin(), ((x + i) % 5) as f64 / 5.0])).collect();
    let exact = randomized_norm(&fs, 3.0, SignEnsemble::Exact, &mu, &e)?;
    let sampled = randomized_norm(&fs, 3.0, SignEnsemble::MonteCarlo { trials: 2000, seed: 1 }, &mu, &e)?;
    println!("exact {:.6}  sampled {:.6} ± {:.6}", exact.value, sampled.value, sampled.stderr.unwrap_or(0.0));

    let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![1.0 / (i + 1) as f64, (i as f64).cos()]).collect();
    let cs: Vec<f64> = (0..8).map(|i| 1.0 - i as f64 / 8.0).collect();
    println!("{:?}", kahane_check(&xs, &cs, 2.0, SignEnsemble::Exact, &e)?);

    let system = DyadicSystem::canonical_torus(64, 2, 0, 6, 0, 1)?;
    let levels = [1, 2, 4, 6];
    let s = stein_check(&fs[..4], &system, &levels, 3.0, SignEnsemble::Exact, &mu, &e)?;
    println!("conditioned / plain = {:.6}", s.ratio);
    let measurable: Vec<VectorFunction> =
        fs[..4].iter().zip(levels).map(|(f, k)| level_expectation(f, &system, k, &mu)).collect::<Result<_, _>>()?;
    println!("already measurable: {}", stein_check(&measurable, &system, &levels, 3.0, SignEnsemble::Exact, &mu, &e)?.ratio);
    Ok(())
}
