//! Explicit constants for time-uniform exceedance of Brownian motions and
//! the ensemble sizes they imply.
//!
//! For a threshold `c` and a target frequency `p < p₀(c) = ¼(1 − Φ(c))`, the
//! margin `ε = (Φ⁻¹(1 − 4p) − c)/3` fixes the largest admissible log-time
//! step `h★`. A geometric grid with ratio `e^h` over `[τ, τ']` has
//! `K = ⌈log(τ'/τ)/h⌉` cells, and `m ≥ (4/p) log(K/δ)` Brownian motions
//! keep at least a `p` fraction above `c√t` on all of `[τ, τ']` with
//! probability `1 − δ`.

use crate::ensemble::check_delta;
use crate::error::{domain, Result};

use super::normal::{normal_quantile, normal_sf};

/// Log-time step used by the fixed-direction ensemble-size formula.
pub const STANDARD_STEP: f64 = 1.0 / 250.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExceedanceConstants {
    pub c: f64,
    pub p: f64,
    /// `¼(1 − Φ(c))`
    pub p0: f64,
    pub eps: f64,
    pub h_star: f64,
    /// Step actually used (`h★` unless overridden).
    pub h: f64,
    pub tau: f64,
    pub tau_prime: f64,
    pub delta: f64,
    /// Number of grid cells `⌈log(τ'/τ)/h⌉` (at least 1).
    pub k: u64,
    /// `⌈(4/p) log(K/δ)⌉`
    pub m_min: u64,
}

/// `p₀(c) = ¼(1 − Φ(c))`.
pub fn p0(c: f64) -> f64 {
    0.25 * normal_sf(c)
}

/// Largest admissible step for margin `eps` at threshold `c`.
pub fn h_star(c: f64, eps: f64) -> f64 {
    let drift = 2.0 * ((c + 3.0 * eps) / (c + 2.0 * eps)).ln();
    let fluctuation = (2.0 * eps * eps / 8f64.ln()).ln_1p();
    1f64.min(drift).min(fluctuation)
}

/// Slack in the two step-size constraints at step `h`; both are nonnegative
/// exactly when `h` is admissible.
///
/// Returns `(e^{−h/2}(c+3ε) − (c+2ε), ½ − 4 exp(−2ε²/(e^h − 1)))`.
pub fn step_constraint_slack(c: f64, eps: f64, h: f64) -> (f64, f64) {
    let drift = (-h / 2.0).exp() * (c + 3.0 * eps) - (c + 2.0 * eps);
    let fluctuation = 0.5 - 4.0 * (-2.0 * eps * eps / h.exp_m1()).exp();
    (drift, fluctuation)
}

pub fn exceedance_constants(
    c: f64,
    p: f64,
    tau: f64,
    tau_prime: f64,
    delta: f64,
    h_override: Option<f64>,
) -> Result<ExceedanceConstants> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(domain(format!("threshold c must be positive, got {c}")));
    }
    let p0 = p0(c);
    if !(p > 0.0 && p < p0) {
        return Err(domain(format!("need 0 < p < p0(c) = {p0}, got p = {p}")));
    }
    if !(tau > 0.0 && tau <= tau_prime && tau_prime.is_finite()) {
        return Err(domain(format!("need 0 < tau <= tau' < inf, got [{tau}, {tau_prime}]")));
    }
    check_delta(delta)?;

    let eps = (normal_quantile(1.0 - 4.0 * p)? - c) / 3.0;
    if !(eps > 0.0) {
        return Err(domain(format!("margin eps = {eps} is not positive")));
    }
    let h_star = h_star(c, eps);
    let h = match h_override {
        Some(h) if h > 0.0 && h <= h_star => h,
        Some(h) => return Err(domain(format!("step h = {h} is not in (0, h* = {h_star}]"))),
        None => h_star,
    };
    let k = grid_cells(tau_prime / tau, h);
    let m_min = ((4.0 / p) * (k as f64 / delta).ln()).ceil() as u64;
    Ok(ExceedanceConstants {
        c,
        p,
        p0,
        eps,
        h_star,
        h,
        tau,
        tau_prime,
        delta,
        k,
        m_min,
    })
}

fn grid_cells(ratio: f64, h: f64) -> u64 {
    ((ratio.ln() / h).ceil() as u64).max(1)
}

/// Ensemble size that controls exceedance along one fixed direction over
/// `n` rounds, using the step `1/250`:
/// `⌈(4/p) log(⌈250 log((λ+n)/λ)⌉/δ)⌉`.
pub fn m0_fixed_direction(lambda: f64, n: usize, delta: f64, p: f64) -> u64 {
    let k = grid_cells((lambda + n as f64) / lambda, STANDARD_STEP);
    ((4.0 / p) * (k as f64 / delta).ln()).ceil() as u64
}

/// A positive `m` with `m ≥ A log m + B`, namely `max(2A log A + 2B, tiny)`.
pub fn solve_log_ineq(a: f64, b: f64) -> f64 {
    (2.0 * a * a.ln() + 2.0 * b).max(f64::MIN_POSITIVE)
}

/// Ensemble size `⌈2000 d max(1, log(n/δ))⌉` that suffices for uniform
/// exceedance control with `γ̄ = 40`.
pub fn corollary1_m(d: usize, n: usize, delta: f64) -> u64 {
    let ell = (n as f64 / delta).ln().max(1.0);
    (2000.0 * d as f64 * ell).ceil() as u64
}
