//! Brownian embedding of diagonal Gaussian martingale transforms.
//!
//! Given predictable coefficients `D_{s,j}` and standard normal innovations
//! `ξ_{s,j}`, the transform `M_{t,j} = Σ_{s≤t} D_{s,j} ξ_{s,j}` is realized as
//! a Brownian path `W^j` read at the clock `A²_{t,j} = Σ_{s≤t} D²_{s,j}`.
//! Each step contributes a unit-time pinned segment ending at `ξ_{s,j}`,
//! scaled by `D_{s,j}` and stretched over a clock increment of `D²_{s,j}`.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::DrawLog;
use crate::error::{Error, Result};
use crate::rng::Rng;

use super::path::{pinned_segment, ClockMark, ClockPath};

/// Coefficients of a diagonal transform: row `s` holds `(D_{s,1}, …, D_{s,m})`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSpec {
    pub coefficients: DMatrix<f64>,
    /// Whether the coefficients were produced by a data-dependent rule.
    pub adaptive: bool,
}

impl TransformSpec {
    pub fn new(coefficients: DMatrix<f64>, adaptive: bool) -> Result<Self> {
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transform coefficients"));
        }
        Ok(Self { coefficients, adaptive })
    }

    /// Horizon: number of steps, counting `s = 0`.
    pub fn n(&self) -> usize {
        self.coefficients.nrows()
    }

    /// Number of coordinates.
    pub fn m(&self) -> usize {
        self.coefficients.ncols()
    }

    /// `A²_{t,j}`, cumulative over rows.
    pub fn clocks(&self) -> DMatrix<f64> {
        let mut a2 = self.coefficients.map(|d| d * d);
        for s in 1..a2.nrows() {
            for j in 0..a2.ncols() {
                a2[(s, j)] += a2[(s - 1, j)];
            }
        }
        a2
    }

    /// `M_{t,j}` evaluated directly from the innovations.
    pub fn martingale(&self, xi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(xi)?;
        let mut mt = self.coefficients.component_mul(xi);
        for s in 1..mt.nrows() {
            for j in 0..mt.ncols() {
                mt[(s, j)] += mt[(s - 1, j)];
            }
        }
        Ok(mt)
    }

    fn check_shape(&self, xi: &DMatrix<f64>) -> Result<()> {
        if xi.shape() != self.coefficients.shape() {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{} innovations", self.n(), self.m()),
                got: format!("{}x{}", xi.nrows(), xi.ncols()),
            });
        }
        Ok(())
    }
}

/// Result of [`embed_transform`].
#[derive(Debug, Clone)]
pub struct Embedding {
    /// One stitched path per coordinate.
    pub paths: Vec<ClockPath>,
    /// `max |W^j(A²_{t,j}) − M_{t,j}| / (1 + |M_{t,j}|)` over all readouts.
    pub max_readout_error: f64,
}

pub fn embed_transform(
    spec: &TransformSpec,
    xi: &DMatrix<f64>,
    segments_per_step: usize,
    rng: &mut Rng,
) -> Result<Embedding> {
    spec.check_shape(xi)?;
    let direct = spec.martingale(xi)?;
    let mut paths = Vec::with_capacity(spec.m());
    let mut max_err = 0.0f64;

    for j in 0..spec.m() {
        let mut path = ClockPath::origin();
        let mut clock = 0.0;
        let mut level = 0.0;
        for s in 0..spec.n() {
            let d = spec.coefficients[(s, j)];
            if d != 0.0 {
                let seg = pinned_segment(1.0, xi[(s, j)], segments_per_step, rng)?;
                let increment = d * d;
                let next_clock = clock + increment;
                let next_level = level + d * xi[(s, j)];
                for (u, b) in seg.grid.iter().zip(&seg.values).skip(1) {
                    let (time, value) = if *u == 1.0 {
                        (next_clock, next_level)
                    } else {
                        (clock + increment * u, level + d * b)
                    };
                    if time > path.last_time() {
                        path.grid.push(time);
                        path.values.push(value);
                    } else if *u == 1.0 {
                        // increment below the clock's resolution
                        *path.values.last_mut().expect("nonempty") = value;
                    }
                }
                clock = *path.grid.last().expect("nonempty");
                level = next_level;
            }
            let mark = ClockMark {
                t: s,
                a2: clock,
                index: path.grid.len() - 1,
            };
            let readout = path.readout(&mark);
            let want = direct[(s, j)];
            max_err = max_err.max((readout - want).abs() / (1.0 + want.abs()));
            path.clock_marks.push(mark);
        }
        paths.push(path);
    }
    Ok(Embedding {
        paths,
        max_readout_error: max_err,
    })
}

/// The transform `⟨u, S̃_t^j⟩` of a logged ensemble run along the unit
/// direction `u`: step 0 carries the prior (`D₀ = √λ`, `ξ₀ = ⟨u, ζ^j⟩`),
/// step `s ≥ 1` has `D_s = ⟨u, X_s⟩` shared by every coordinate.
pub fn ensemble_transform(
    log: &DrawLog,
    actions: &[DVector<f64>],
    u: &DVector<f64>,
    lambda: f64,
) -> Result<(TransformSpec, DMatrix<f64>)> {
    if actions.len() != log.perturbations.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} actions", log.perturbations.len()),
            got: format!("{}", actions.len()),
        });
    }
    let m = log.prior.nrows();
    let n = actions.len() + 1;
    let mut coefficients = DMatrix::zeros(n, m);
    let mut xi = DMatrix::zeros(n, m);
    let prior_proj = &log.prior * u;
    for j in 0..m {
        coefficients[(0, j)] = lambda.sqrt();
        xi[(0, j)] = prior_proj[j];
    }
    for (s, (x, draws)) in actions.iter().zip(&log.perturbations).enumerate() {
        let d = x.dot(u);
        for j in 0..m {
            coefficients[(s + 1, j)] = d;
            xi[(s + 1, j)] = draws[j];
        }
    }
    Ok((TransformSpec::new(coefficients, true)?, xi))
}
