//! Regularized design-matrix algebra.
//!
//! [`DesignState`] tracks `V_t = λI + Σ x_s x_sᵀ` together with its inverse and
//! log-determinant. Updates use the Sherman–Morrison identity (O(d²) per
//! action) and the inverse is periodically rebuilt from a Cholesky factor so
//! that floating-point drift stays bounded over long runs.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};

/// Slack allowed on the unit-ball constraint for actions.
pub const ACTION_NORM_SLACK: f64 = 1e-12;

/// Default number of rank-one updates between full refactorizations.
pub const DEFAULT_REFACTOR_EVERY: usize = 512;

// A probe column whose residual exceeds this triggers an early refactorization.
const DRIFT_TRIGGER: f64 = 1e-10;

/// Which quadratic form a weighted norm is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `‖u‖_V = √(uᵀ V u)`
    Design,
    /// `‖u‖_{V⁻¹} = √(uᵀ V⁻¹ u)`
    Inverse,
}

#[derive(Debug, Clone)]
pub struct DesignState {
    dim: usize,
    lambda: f64,
    v: DMatrix<f64>,
    v_inv: DMatrix<f64>,
    log_det: f64,
    t: usize,
    refactor_every: usize,
    since_refactor: usize,
}

impl DesignState {
    /// `V_0 = λ I_d`.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(domain(format!("lambda must be positive and finite, got {lambda}")));
        }
        Ok(Self {
            dim,
            lambda,
            v: DMatrix::identity(dim, dim) * lambda,
            v_inv: DMatrix::identity(dim, dim) / lambda,
            log_det: dim as f64 * lambda.ln(),
            t: 0,
            refactor_every: DEFAULT_REFACTOR_EVERY,
            since_refactor: 0,
        })
    }

    /// Sets the refactorization period (`0` disables periodic refactorization).
    pub fn with_refactor_every(mut self, every: usize) -> Self {
        self.refactor_every = every;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn v_inv(&self) -> &DMatrix<f64> {
        &self.v_inv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Number of absorbed actions.
    pub fn rounds(&self) -> usize {
        self.t
    }

    /// Absorbs one action: `V ← V + x xᵀ`.
    ///
    /// The zero action is accepted and only advances the round counter.
    pub fn rank_one_update(&mut self, x: &DVector<f64>) -> Result<()> {
        self.check_dim(x)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("action"));
        }
        let norm = x.norm();
        if norm > 1.0 + ACTION_NORM_SLACK {
            return Err(Error::ActionDomain(format!("‖x‖ = {norm} exceeds 1")));
        }
        self.t += 1;
        if norm == 0.0 {
            return Ok(());
        }

        let vx = &self.v_inv * x;
        let q = x.dot(&vx);
        self.v.ger(1.0, x, x, 1.0);
        self.v_inv.ger(-1.0 / (1.0 + q), &vx, &vx, 1.0);
        self.log_det += q.ln_1p();
        symmetrize(&mut self.v);
        symmetrize(&mut self.v_inv);

        self.since_refactor += 1;
        let periodic = self.refactor_every > 0 && self.since_refactor >= self.refactor_every;
        if periodic || self.probe_drift() > DRIFT_TRIGGER {
            self.refactor();
        }
        Ok(())
    }

    /// Rebuilds `V⁻¹` and `log det V` from a Cholesky factorization of `V`.
    pub fn refactor(&mut self) {
        if let Some(chol) = self.v.clone().cholesky() {
            self.log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
            self.v_inv = chol.inverse();
            symmetrize(&mut self.v_inv);
        }
        self.since_refactor = 0;
    }

    pub fn weighted_norm(&self, u: &DVector<f64>, kind: NormKind) -> Result<f64> {
        self.check_dim(u)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("direction"));
        }
        let m = match kind {
            NormKind::Design => &self.v,
            NormKind::Inverse => &self.v_inv,
        };
        Ok(quad_form(m, u).max(0.0).sqrt())
    }

    /// Solves `V y = b` using the maintained inverse plus one refinement step.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut y = &self.v_inv * b;
        let r = b - &self.v * &y;
        y += &self.v_inv * r;
        y
    }

    /// `max |V V⁻¹ − I|` over all entries.
    pub fn inverse_residual(&self) -> f64 {
        let prod = &self.v * &self.v_inv;
        let eye = DMatrix::<f64>::identity(self.dim, self.dim);
        (prod - eye).amax()
    }

    fn probe_drift(&self) -> f64 {
        let k = self.t % self.dim;
        let mut col = &self.v * self.v_inv.column(k);
        col[k] -= 1.0;
        col.amax()
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {}", self.dim),
                got: format!("length {}", x.len()),
            });
        }
        Ok(())
    }
}

/// `uᵀ M u`.
pub fn quad_form(m: &DMatrix<f64>, u: &DVector<f64>) -> f64 {
    u.dot(&(m * u))
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Distance between the normalizations of two nonzero vectors,
/// `‖a/‖a‖ − b/‖b‖‖`, paired with the bound `2‖a − b‖ / min(‖a‖, ‖b‖)`.
pub fn normalization_gap(a: &DVector<f64>, b: &DVector<f64>) -> (f64, f64) {
    let (na, nb) = (a.norm(), b.norm());
    let lhs = (a / na - b / nb).norm();
    let rhs = 2.0 * (a - b).norm() / na.min(nb);
    (lhs, rhs)
}
