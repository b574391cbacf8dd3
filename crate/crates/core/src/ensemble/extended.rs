//! Double-double shadow of the ensemble statistics.
//!
//! Rounding at 53 bits leaks a small component of every action out of the
//! span of the prior vectors, and the ensemble dynamics amplify that leak
//! geometrically. Keeping `V⁻¹`, `S` and `S̃` at roughly 106 bits pushes the
//! leak far below anything observable over practical horizons.

use nalgebra::{DMatrix, DVector};
use twofloat::TwoFloat;

use crate::environment::{ActionSet, ZERO_THRESHOLD};

fn tf(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn round(v: &[TwoFloat]) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().map(|x| x.hi() + x.lo()))
}

/// Quotient by two correction steps; the crate's own division loses the low
/// word.
fn div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

fn dot(a: &[TwoFloat], b: &[TwoFloat]) -> TwoFloat {
    a.iter().zip(b).fold(TwoFloat::from(0.0), |acc, (x, y)| acc + *x * *y)
}

#[derive(Debug, Clone)]
pub(super) struct ExtendedState {
    dim: usize,
    /// Row-major `d × d`.
    v_inv: Vec<TwoFloat>,
    s_data: Vec<TwoFloat>,
    /// Row-major `m × d`.
    s_tilde: Vec<TwoFloat>,
    /// Last action handed out, with its unrounded coordinates.
    pending: Option<(DVector<f64>, Vec<TwoFloat>)>,
}

impl ExtendedState {
    pub(super) fn new(zeta: &DMatrix<f64>, lambda: f64) -> Self {
        let (m, dim) = zeta.shape();
        let root = tf(lambda).sqrt();
        let inv = div(TwoFloat::from(1.0), tf(lambda));
        let mut v_inv = vec![TwoFloat::from(0.0); dim * dim];
        for i in 0..dim {
            v_inv[i * dim + i] = inv;
        }
        let s_tilde = (0..m * dim).map(|k| tf(zeta[(k / dim, k % dim)]) * root).collect();
        Self {
            dim,
            v_inv,
            s_data: vec![TwoFloat::from(0.0); dim],
            s_tilde,
            pending: None,
        }
    }

    fn solve(&self, b: &[TwoFloat]) -> Vec<TwoFloat> {
        self.v_inv.chunks(self.dim).map(|row| dot(row, b)).collect()
    }

    fn accumulator(&self, j: usize) -> &[TwoFloat] {
        &self.s_tilde[j * self.dim..(j + 1) * self.dim]
    }

    /// `V⁻¹ (S + scale · S̃^j)`.
    pub(super) fn model(&self, j: usize, scale: f64) -> Vec<TwoFloat> {
        let s = tf(scale);
        let b: Vec<_> = self.s_data.iter().zip(self.accumulator(j)).map(|(a, c)| *a + s * *c).collect();
        self.solve(&b)
    }

    pub(super) fn model_f64(&self, j: usize, scale: f64) -> DVector<f64> {
        round(&self.model(j, scale))
    }

    pub(super) fn theta_hat(&self) -> DVector<f64> {
        round(&self.solve(&self.s_data))
    }

    pub(super) fn s_data(&self) -> DVector<f64> {
        round(&self.s_data)
    }

    pub(super) fn s_tilde(&self, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, self.dim, |j, k| {
            let x = self.s_tilde[j * self.dim + k];
            x.hi() + x.lo()
        })
    }

    /// Greedy action for an extended-precision model; on the ball the
    /// normalization is done before rounding.
    pub(super) fn act(&self, actions: &ActionSet, theta: &[TwoFloat]) -> (DVector<f64>, Vec<TwoFloat>) {
        match actions {
            ActionSet::UnitBall { dim } => {
                let norm = dot(theta, theta).sqrt();
                if norm.hi() <= ZERO_THRESHOLD {
                    (DVector::zeros(*dim), vec![TwoFloat::from(0.0); *dim])
                } else {
                    let x: Vec<_> = theta.iter().map(|v| div(*v, norm)).collect();
                    (round(&x), x)
                }
            }
            ActionSet::FiniteSet { .. } => {
                let x = actions.argmax(&round(theta));
                let exact = x.iter().map(|v| tf(*v)).collect();
                (x, exact)
            }
        }
    }

    pub(super) fn remember(&mut self, x: DVector<f64>, exact: Vec<TwoFloat>) {
        self.pending = Some((x, exact));
    }

    pub(super) fn update(&mut self, x: &DVector<f64>, y: f64, xi: &DVector<f64>) {
        let exact = match self.pending.take() {
            Some((rounded, exact)) if &rounded == x => exact,
            _ => x.iter().map(|v| tf(*v)).collect(),
        };
        let u = self.solve(&exact);
        let denom = TwoFloat::from(1.0) + dot(&exact, &u);
        let d = self.dim;
        for i in 0..d {
            let ui = div(u[i], denom);
            for k in 0..d {
                self.v_inv[i * d + k] -= ui * u[k];
            }
        }
        let y = tf(y);
        for (s, xk) in self.s_data.iter_mut().zip(&exact) {
            *s += y * *xk;
        }
        for (j, xij) in xi.iter().enumerate() {
            if *xij != 0.0 {
                let xij = tf(*xij);
                for (s, xk) in self.s_tilde[j * d..(j + 1) * d].iter_mut().zip(&exact) {
                    *s += xij * *xk;
                }
            }
        }
    }
}
