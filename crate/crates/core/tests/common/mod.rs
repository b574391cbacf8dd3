#![allow(dead_code)]

use ensemble_lab::brownian::normal_cdf;

/// Kolmogorov–Smirnov critical value at level 0.001 for sample size `n`.
pub fn ks_critical_001(n: usize) -> f64 {
    1.9495 / (n as f64).sqrt()
}

/// KS distance between the sample and `N(0, var)`.
pub fn ks_normal(samples: &mut [f64], var: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let sd = var.sqrt();
    samples
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let f = normal_cdf(x / sd);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Three binomial standard errors around a target frequency.
pub fn binomial_slack(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

use ensemble_lab::brownian::TransformSpec;
use ensemble_lab::rng::Rng;
use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Innovations plus coefficients chosen by a predictable rule: row `s` of
/// `D` depends only on the martingale through step `s − 1`. Some rows
/// switch coordinates off, some flip sign, and the overall scale varies.
pub fn random_adaptive_spec(n: usize, m: usize, rng: &mut Rng) -> (TransformSpec, DMatrix<f64>) {
    let xi = DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(rng));
    let scale = 10f64.powf(rng.random_range(-2.0..2.0));
    let freq: f64 = rng.random_range(0.2..3.0);
    let mut d = DMatrix::zeros(n, m);
    let mut level = vec![0.0; m];
    for s in 0..n {
        for j in 0..m {
            let coef = if s == 0 {
                scale * rng.random_range(0.5..2.0)
            } else if (s + j) % 7 == 3 {
                0.0
            } else {
                scale * (freq * level[j] / scale + s as f64).sin() * 1.5
            };
            d[(s, j)] = coef;
        }
        for j in 0..m {
            level[j] += d[(s, j)] * xi[(s, j)];
        }
    }
    (TransformSpec::new(d, true).unwrap(), xi)
}
