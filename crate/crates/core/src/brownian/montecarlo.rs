//! Monte-Carlo exceedance experiments for independent Brownian motions and
//! for diagonal transforms with coefficients fixed in advance.
//!
//! Replication `r` draws from `stream(seed, r, MonteCarlo)`, so results do
//! not depend on thread scheduling.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::rng::{stream, StreamTag};

use super::path::geometric_grid;
use super::embed::TransformSpec;

/// Grid infimum, over `t ∈ [τ, τ']`, of the fraction of `m` independent
/// Brownian motions with `W^j(t) ≥ c√t`. One value per replication, in
/// replication order.
pub fn bm_exceedance_mc(
    m: usize,
    c: f64,
    tau: f64,
    tau_prime: f64,
    grid_per_unit_log: usize,
    reps: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    if m == 0 {
        return Err(domain("need at least one Brownian motion"));
    }
    let grid = geometric_grid(tau, tau_prime, grid_per_unit_log)?;
    // sqrt of increments and of times, shared by every path
    let steps: Vec<f64> = grid.windows(2).map(|w| (w[1] - w[0]).sqrt()).collect();
    let thresholds: Vec<f64> = grid[1..].iter().map(|t| c * t.sqrt()).collect();

    Ok((0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep as u64, StreamTag::MonteCarlo);
            let mut counts = vec![0u32; thresholds.len()];
            for _ in 0..m {
                let mut w = 0.0;
                for ((sd, thr), count) in steps.iter().zip(&thresholds).zip(counts.iter_mut()) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w += sd * z;
                    if w >= *thr {
                        *count += 1;
                    }
                }
            }
            let min = counts.iter().copied().min().unwrap_or(m as u32);
            (rep, min as f64 / m as f64)
        })
        .collect())
}

/// Fraction of replications in which
/// `min_t (1/m) #{j : M_{t,j}/A_{t,j} ≥ c} < p`, for a diagonal transform
/// whose coefficients are fixed before the innovations are drawn.
pub fn independent_coeff_exceedance_mc(spec: &TransformSpec, c: f64, p: f64, reps: usize, seed: u64) -> Result<f64> {
    let clocks = spec.clocks();
    if clocks.iter().any(|a2| !(*a2 > 0.0)) {
        return Err(domain("every clock A_{t,j} must be positive"));
    }
    if reps == 0 {
        return Err(domain("need at least one replication"));
    }
    let (n, m) = (spec.n(), spec.m());
    let scale = clocks.map(|a2| 1.0 / a2.sqrt());
    let failures: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream(seed, rep as u64, StreamTag::MonteCarlo);
            let xi = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut rng));
            let mt = spec.martingale(&xi).expect("shapes agree by construction");
            let min_frac = (0..n)
                .map(|t| (0..m).filter(|&j| mt[(t, j)] * scale[(t, j)] >= c).count() as f64 / m as f64)
                .fold(f64::INFINITY, f64::min);
            usize::from(min_frac < p)
        })
        .sum();
    Ok(failures as f64 / reps as f64)
}
