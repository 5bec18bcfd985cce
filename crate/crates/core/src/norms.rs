//! Bochner norms and Rademacher-randomized norms of vector-valued functions.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubes::DyadicSystem;
use crate::error::{invalid, Error, Result};
use crate::haar::{level_expectation, NormedSpace, VectorFunction};
use crate::metric::Measure;

/// Largest number of summands enumerated exactly.
pub const MAX_EXACT_SUMMANDS: usize = 20;

/// How the expectation over random signs is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SignEnsemble {
    /// All `2^N` sign patterns.
    Exact,
    /// Independent sign draws; trial `t` uses stream `t` of the seeded generator.
    MonteCarlo { trials: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard error of `value`; `None` for exact results and for `p = ∞`.
    pub stderr: Option<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) {
        return Err(invalid(format!("exponent must be >= 1, got {p}")));
    }
    Ok(())
}

/// `‖f‖_{L^p(μ; E)}`.
pub fn bochner_norm(f: &VectorFunction, p: f64, mu: &Measure, e: &NormedSpace) -> Result<f64> {
    check_p(p)?;
    if f.dim() != e.dim {
        return Err(Error::DimensionMismatch { expected: e.dim, got: f.dim() });
    }
    if f.len() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: f.len() });
    }
    let norms = (0..f.len()).map(|x| e.norm(f.value(x)));
    if p.is_infinite() {
        return Ok(norms.fold(0.0, f64::max));
    }
    Ok(norms.enumerate().map(|(x, v)| mu.weight(x) * v.powf(p)).sum::<f64>().powf(1.0 / p))
}

/// Points grouped by their values under all summands.
struct Compressed {
    weights: Vec<f64>,
    /// `rows[c][i * d..(i + 1) * d]` is summand `i` at class `c`.
    rows: Vec<Vec<f64>>,
    n: usize,
    d: usize,
}

fn compress(summands: &[VectorFunction], weights: &[f64], e: &NormedSpace) -> Result<Compressed> {
    let d = e.dim;
    let npts = weights.len();
    for s in summands {
        if s.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: s.dim() });
        }
        if s.len() != npts {
            return Err(Error::DimensionMismatch { expected: npts, got: s.len() });
        }
    }
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut out = Compressed { weights: Vec::new(), rows: Vec::new(), n: summands.len(), d };
    for x in 0..npts {
        let row: Vec<f64> = summands.iter().flat_map(|s| s.value(x).iter().copied()).collect();
        let key: Vec<u64> = row.iter().map(|v| (v + 0.0).to_bits()).collect();
        match index.get(&key) {
            Some(&c) => out.weights[c] += weights[x],
            None => {
                index.insert(key, out.rows.len());
                out.weights.push(weights[x]);
                out.rows.push(row);
            }
        }
    }
    Ok(out)
}

impl Compressed {
    /// `Σ_c w_c ‖S_c‖^p`, or `max_c ‖S_c‖` for `p = ∞`, given the current sums.
    fn functional(&self, sums: &[f64], p: f64, e: &NormedSpace) -> f64 {
        let d = self.d;
        if p.is_infinite() {
            return (0..self.weights.len()).map(|c| e.norm(&sums[c * d..(c + 1) * d])).fold(0.0, f64::max);
        }
        self.weights.iter().enumerate().map(|(c, w)| w * e.norm(&sums[c * d..(c + 1) * d]).powf(p)).sum()
    }

    fn sums_for(&self, signs: impl Fn(usize) -> f64) -> Vec<f64> {
        let d = self.d;
        let mut sums = vec![0.0; self.weights.len() * d];
        for (c, row) in self.rows.iter().enumerate() {
            for i in 0..self.n {
                let s = signs(i);
                for j in 0..d {
                    sums[c * d + j] += s * row[i * d + j];
                }
            }
        }
        sums
    }

    fn flip(&self, sums: &mut [f64], i: usize, new_sign: f64) {
        let d = self.d;
        for (c, row) in self.rows.iter().enumerate() {
            for j in 0..d {
                sums[c * d + j] += 2.0 * new_sign * row[i * d + j];
            }
        }
    }
}

/// Gray-code walks restart from scratch every this many patterns.
const BLOCK_BITS: usize = 10;

/// Mean of the functional over all sign patterns with `ε_0 = +1`
/// (the functional is even in the signs), or its maximum for `p = ∞`.
fn exact_moment(c: &Compressed, p: f64, e: &NormedSpace) -> f64 {
    if c.n == 0 {
        return 0.0;
    }
    let free = c.n - 1;
    let low = free.min(BLOCK_BITS);
    let blocks = 1usize << (free - low);
    let per_block: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            // summand 0 fixed +1; summands 1..=low walk a Gray code; the rest follow `b`
            let sign_of = |i: usize, gray: usize| -> f64 {
                if i == 0 {
                    1.0
                } else if i <= low {
                    if gray >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 }
                } else if b >> (i - 1 - low) & 1 == 1 {
                    -1.0
                } else {
                    1.0
                }
            };
            let mut sums = c.sums_for(|i| sign_of(i, 0));
            let mut acc = c.functional(&sums, p, e);
            for s in 1..(1usize << low) {
                let bit = s.trailing_zeros() as usize;
                let gray = s ^ (s >> 1);
                c.flip(&mut sums, bit + 1, sign_of(bit + 1, gray));
                let v = c.functional(&sums, p, e);
                acc = if p.is_infinite() { acc.max(v) } else { acc + v };
            }
            acc
        })
        .collect();
    if p.is_infinite() {
        per_block.into_iter().fold(0.0, f64::max)
    } else {
        per_block.iter().sum::<f64>() / (1usize << free) as f64
    }
}

/// Per-trial values of the functional under random signs.
fn sampled_values(c: &Compressed, p: f64, e: &NormedSpace, trials: usize, seed: u64) -> Vec<f64> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            let signs: Vec<f64> = (0..c.n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
            c.functional(&c.sums_for(|i| signs[i]), p, e)
        })
        .collect()
}

/// `E ‖Σ ε_i g_i‖^p` integrated against the weights, with the standard error
/// of the mean for Monte Carlo.
fn moment(c: &Compressed, p: f64, ens: SignEnsemble, e: &NormedSpace) -> Result<(f64, Option<f64>)> {
    match ens {
        SignEnsemble::Exact => {
            if c.n > MAX_EXACT_SUMMANDS {
                return Err(Error::TooManySummands(c.n));
            }
            Ok((exact_moment(c, p, e), None))
        }
        SignEnsemble::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(invalid("Monte Carlo needs at least one trial"));
            }
            let vals = sampled_values(c, p, e, trials, seed);
            if p.is_infinite() {
                return Ok((vals.into_iter().fold(0.0, f64::max), None));
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = if vals.len() > 1 { vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            Ok((mean, Some((var / n).sqrt())))
        }
    }
}

fn root(mean: f64, se: Option<f64>, p: f64) -> Estimate {
    if p.is_infinite() {
        return Estimate { value: mean, stderr: None };
    }
    let value = mean.powf(1.0 / p);
    // delta method for m ↦ m^{1/p}
    let stderr = se.map(|s| if mean > 0.0 { s * value / (p * mean) } else { 0.0 });
    Estimate { value, stderr }
}

/// `‖Σ_i ε_i g_i‖_{L^p(μ × P; E)}`.
pub fn randomized_norm(summands: &[VectorFunction], p: f64, ens: SignEnsemble, mu: &Measure, e: &NormedSpace) -> Result<Estimate> {
    check_p(p)?;
    let c = compress(summands, mu.weights(), e)?;
    let (mean, se) = moment(&c, p, ens, e)?;
    Ok(root(mean, se, p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCheck {
    /// `E ‖Σ ε_i c_i x_i‖^p`.
    pub lhs: f64,
    /// `max |c_i|^p · E ‖Σ ε_i x_i‖^p`.
    pub rhs: f64,
    pub pass: bool,
}

/// Contraction principle for Rademacher sums of vectors in `E`
/// (for `p = ∞` both sides are suprema over patterns).
pub fn kahane_check(xs: &[Vec<f64>], scalars: &[f64], p: f64, ens: SignEnsemble, e: &NormedSpace) -> Result<ContractionCheck> {
    check_p(p)?;
    if xs.len() != scalars.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: scalars.len() });
    }
    let plain: Vec<VectorFunction> = xs.iter().map(|x| VectorFunction::new(e.dim, x.clone())).collect::<Result<_>>()?;
    let weighted: Vec<VectorFunction> = plain.iter().zip(scalars).map(|(f, &a)| f.scaled(a)).collect();
    let one = [1.0];
    let (lhs, _) = moment(&compress(&weighted, &one, e)?, p, ens, e)?;
    let (base, _) = moment(&compress(&plain, &one, e)?, p, ens, e)?;
    let cmax = scalars.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let rhs = if p.is_infinite() { cmax * base } else { cmax.powf(p) * base };
    Ok(ContractionCheck { lhs, rhs, pass: lhs <= rhs * (1.0 + 1e-12) + 1e-300 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteinRatio {
    /// `‖Σ ε_k E_{k} f_k‖`.
    pub numerator: Estimate,
    /// `‖Σ ε_k f_k‖`.
    pub denominator: Estimate,
    pub ratio: f64,
}

/// Ratio of the randomized norms of `(E_{levels[i]} f_i)` and `(f_i)`;
/// levels must be nondecreasing. `0/0` counts as ratio 1.
#[allow(clippy::too_many_arguments)]
pub fn stein_check(
    fs: &[VectorFunction],
    system: &DyadicSystem,
    levels: &[i32],
    p: f64,
    ens: SignEnsemble,
    mu: &Measure,
    e: &NormedSpace,
) -> Result<SteinRatio> {
    if fs.len() != levels.len() {
        return Err(Error::DimensionMismatch { expected: fs.len(), got: levels.len() });
    }
    if levels.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("levels must be nondecreasing"));
    }
    let conditioned: Vec<VectorFunction> =
        fs.iter().zip(levels).map(|(f, &k)| level_expectation(f, system, k, mu)).collect::<Result<_>>()?;
    let numerator = randomized_norm(&conditioned, p, ens, mu, e)?;
    let denominator = randomized_norm(fs, p, ens, mu, e)?;
    let ratio = if denominator.value == 0.0 {
        if numerator.value == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        numerator.value / denominator.value
    };
    Ok(SteinRatio { numerator, denominator, ratio })
}

/// `α = 1/min(t, p) - 1/max(q, p)` for type `t`, cotype `q` and exponent `p`.
pub fn alpha_exponent(t_e: f64, q_e: f64, p: f64) -> Result<f64> {
    if !(1.0..=2.0).contains(&t_e) {
        return Err(invalid(format!("type must lie in [1, 2], got {t_e}")));
    }
    if !(q_e >= 2.0) {
        return Err(invalid(format!("cotype must be >= 2, got {q_e}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid(format!("exponent must lie in (1, ∞), got {p}")));
    }
    let alpha = 1.0 / t_e.min(p) - 1.0 / q_e.max(p);
    if alpha >= 1.0 {
        return Err(invalid(format!("type {t_e} with cotype {q_e} gives α = {alpha}, which is not below 1")));
    }
    Ok(alpha)
}
