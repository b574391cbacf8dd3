//! Discretized Brownian paths, pinned segments and the Lamperti (OU) transform.
//!
//! Paths are only ever sampled at grid points with exact Gaussian increments,
//! so there is no time-stepping error; the only approximation is that
//! suprema and infima are taken over the grid.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Result};
use crate::rng::Rng;

/// A readout of the path at a discrete clock value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockMark {
    /// Discrete index `t`.
    pub t: usize,
    /// Clock value `A_t²`.
    pub a2: f64,
    /// Position of `a2` in the path grid.
    pub index: usize,
}

/// A path `W` sampled on a strictly increasing grid starting at `(0, 0)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClockPath {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub clock_marks: Vec<ClockMark>,
}

impl ClockPath {
    pub fn origin() -> Self {
        Self {
            grid: vec![0.0],
            values: vec![0.0],
            clock_marks: Vec::new(),
        }
    }

    /// Value at a grid time, if that time is on the grid.
    pub fn value_at(&self, time: f64) -> Option<f64> {
        self.grid
            .binary_search_by(|g| g.total_cmp(&time))
            .ok()
            .map(|i| self.values[i])
    }

    pub fn readout(&self, mark: &ClockMark) -> f64 {
        self.values[mark.index]
    }

    pub fn last_time(&self) -> f64 {
        *self.grid.last().expect("paths are never empty")
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().expect("paths are never empty")
    }

    /// Checks the structural invariants: origin at zero, strictly increasing
    /// grid, nondecreasing clock marks that point at their grid times.
    pub fn is_well_formed(&self) -> bool {
        self.grid.len() == self.values.len()
            && self.grid.first() == Some(&0.0)
            && self.values.first() == Some(&0.0)
            && self.grid.windows(2).all(|w| w[0] < w[1])
            && self.clock_marks.windows(2).all(|w| w[0].t < w[1].t && w[0].a2 <= w[1].a2)
            && self.clock_marks.iter().all(|m| self.grid.get(m.index) == Some(&m.a2))
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) {
        return Err(domain("grid must start at 0"));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) || grid.iter().any(|g| !g.is_finite()) {
        return Err(domain("grid must be finite and strictly increasing"));
    }
    Ok(())
}

/// Standard Brownian motion sampled on `grid` (which must start at 0).
pub fn brownian_on_grid(grid: &[f64], rng: &mut Rng) -> Result<ClockPath> {
    check_grid(grid)?;
    let mut values = Vec::with_capacity(grid.len());
    values.push(0.0);
    let mut w = 0.0;
    for pair in grid.windows(2) {
        let z: f64 = StandardNormal.sample(rng);
        w += (pair[1] - pair[0]).sqrt() * z;
        values.push(w);
    }
    Ok(ClockPath {
        grid: grid.to_vec(),
        values,
        clock_marks: Vec::new(),
    })
}

/// `n + 1` equally spaced points on `[0, len]`, with the endpoint exact.
pub fn uniform_grid(len: f64, n: usize) -> Vec<f64> {
    let mut g: Vec<f64> = (0..=n).map(|k| len * k as f64 / n as f64).collect();
    g[n] = len;
    g
}

/// `0` followed by a geometric grid on `[τ, τ']` with `points_per_unit_log`
/// points per unit of `log t`; the last point is exactly `τ'`.
pub fn geometric_grid(tau: f64, tau_prime: f64, points_per_unit_log: usize) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau <= tau_prime && tau_prime.is_finite()) {
        return Err(domain(format!("need 0 < tau <= tau' < inf, got [{tau}, {tau_prime}]")));
    }
    if points_per_unit_log == 0 {
        return Err(domain("grid density must be positive"));
    }
    let span = (tau_prime / tau).ln();
    let cells = ((span * points_per_unit_log as f64).ceil() as usize).max(1);
    let mut g = Vec::with_capacity(cells + 2);
    g.push(0.0);
    for k in 0..=cells {
        g.push(tau * (span * k as f64 / cells as f64).exp());
    }
    g[cells + 1] = tau_prime;
    if tau == tau_prime {
        g.truncate(2);
    }
    Ok(g)
}

/// Brownian path on `[0, Δ]` pinned to end at `z`.
///
/// Built as `B(t) = B̃(t) − (t/Δ) B̃(Δ) + (t/Δ) z` from an unpinned path `B̃`
/// on `n_grid` equal subintervals, so `B(Δ) = z` exactly. When `z ~ N(0, Δ)`
/// independently of `B̃`, `B` is a standard Brownian motion on `[0, Δ]`.
pub fn pinned_segment(delta_len: f64, z: f64, n_grid: usize, rng: &mut Rng) -> Result<ClockPath> {
    if !(delta_len > 0.0 && delta_len.is_finite()) {
        return Err(domain(format!("segment length must be positive, got {delta_len}")));
    }
    if n_grid < 2 {
        return Err(domain("pinned segment needs at least 2 subintervals"));
    }
    let grid = uniform_grid(delta_len, n_grid);
    let mut path = brownian_on_grid(&grid, rng)?;
    let end = path.last_value();
    for (t, v) in path.grid.iter().zip(path.values.iter_mut()) {
        let frac = t / delta_len;
        *v = *v - frac * end + frac * z;
    }
    path.values[n_grid] = z;
    Ok(path)
}

/// Lamperti transform `U(s) = e^{−s/2} W(e^s)` evaluated at `s = log t` for
/// every grid time `t ≥ τ`. Returns `(s, U(s))` pairs.
pub fn ou_transform(path: &ClockPath, tau: f64) -> Result<Vec<(f64, f64)>> {
    if !(tau > 0.0) {
        return Err(domain(format!("OU transform needs tau > 0, got {tau}")));
    }
    Ok(path
        .grid
        .iter()
        .zip(&path.values)
        .filter(|(t, _)| **t >= tau)
        .map(|(t, w)| (t.ln(), w / t.sqrt()))
        .collect())
}

/// `4 exp(−a²/(2T))`, the reflection-principle bound on `P(sup_{[0,T]} |W| ≥ a)`.
pub fn bm_sup_tail_bound_raw(a: f64, horizon: f64) -> f64 {
    4.0 * (-a * a / (2.0 * horizon)).exp()
}

/// [`bm_sup_tail_bound_raw`] capped at 1.
pub fn bm_sup_tail_bound(a: f64, horizon: f64) -> f64 {
    bm_sup_tail_bound_raw(a, horizon).min(1.0)
}
