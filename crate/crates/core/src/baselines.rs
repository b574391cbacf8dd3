//! Reference learners: inflated Thompson sampling, LinUCB and greedy.
//!
//! All three share the ridge statistics of [`DesignState`] and use the same
//! confidence radius as the ensemble.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::ensemble::{beta_formula, check_delta};
use crate::environment::{argmax_index, ActionSet, Learner, ZERO_THRESHOLD};
use crate::error::Result;
use crate::linalg::{quad_form, DesignState};
use crate::rng::Rng;

/// Fixed-point iterations for the unit-ball UCB maximizer.
pub const UCB_BALL_ITERATIONS: usize = 64;
pub const UCB_BALL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineVariant {
    /// `θ̃ = θ̂ + β V^{-1/2} g` with `g` standard normal.
    ThompsonInflated,
    LinUcb,
    Greedy,
}

#[derive(Debug, Clone)]
pub struct BaselineState {
    variant: BaselineVariant,
    delta: f64,
    design: DesignState,
    s_data: DVector<f64>,
    theta_hat: DVector<f64>,
    // radius multiplier; 1 everywhere except in tests of degenerate cases
    inflation: f64,
}

impl BaselineState {
    pub fn new(variant: BaselineVariant, dim: usize, lambda: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            variant,
            delta,
            design: DesignState::new(dim, lambda)?,
            s_data: DVector::zeros(dim),
            theta_hat: DVector::zeros(dim),
            inflation: 1.0,
        })
    }

    /// Scales the confidence radius used for exploration.
    pub fn with_inflation(mut self, inflation: f64) -> Self {
        self.inflation = inflation;
        self
    }

    pub fn variant(&self) -> BaselineVariant {
        self.variant
    }

    pub fn design(&self) -> &DesignState {
        &self.design
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn radius(&self) -> f64 {
        self.inflation * beta_formula(&self.design, self.delta)
    }

    pub fn select(&self, actions: &ActionSet, rng: &mut Rng) -> DVector<f64> {
        let beta = self.radius();
        match self.variant {
            BaselineVariant::Greedy => actions.argmax(&self.theta_hat),
            BaselineVariant::ThompsonInflated => {
                let d = self.design.dim();
                let g = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
                let sample = &self.theta_hat + inverse_sqrt(self.design.v()) * g * beta;
                actions.argmax(&sample)
            }
            BaselineVariant::LinUcb => match actions {
                ActionSet::FiniteSet { arms } => {
                    let v_inv = self.design.v_inv();
                    let scores = arms
                        .iter()
                        .map(|a| a.dot(&self.theta_hat) + beta * quad_form(v_inv, a).max(0.0).sqrt());
                    arms[argmax_index(scores)].clone()
                }
                ActionSet::UnitBall { .. } => ucb_on_ball(&self.theta_hat, self.design.v(), self.design.v_inv(), beta),
            },
        }
    }

    pub fn update(&mut self, x: &DVector<f64>, y: f64) -> Result<()> {
        self.design.rank_one_update(x)?;
        self.s_data.axpy(y, x, 1.0);
        self.theta_hat = self.design.solve(&self.s_data);
        Ok(())
    }
}

impl Learner for BaselineState {
    fn select(&mut self, actions: &ActionSet, rng: &mut Rng) -> DVector<f64> {
        BaselineState::select(self, actions, rng)
    }

    fn observe(&mut self, x: &DVector<f64>, y: f64, _rng: &mut Rng) -> Result<()> {
        self.update(x, y)
    }

    fn beta(&self) -> f64 {
        self.radius()
    }
}

/// `V^{-1/2}` from a symmetric eigendecomposition.
pub fn inverse_sqrt(v: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = v.clone().symmetric_eigen();
    let scale = eig.eigenvalues.map(|e| 1.0 / e.max(f64::MIN_POSITIVE).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&scale) * eig.eigenvectors.transpose()
}

fn ucb_objective(x: &DVector<f64>, theta_hat: &DVector<f64>, v_inv: &DMatrix<f64>, beta: f64) -> f64 {
    x.dot(theta_hat) + beta * quad_form(v_inv, x).max(0.0).sqrt()
}

/// Approximate maximizer of `⟨x, θ̂⟩ + β‖x‖_{V⁻¹}` over the unit ball.
///
/// The objective is convex, so the maximum sits on the sphere. Iterates the
/// stationarity condition `x ∝ θ̂ + β V⁻¹x / ‖x‖_{V⁻¹}` from the better of two
/// starts (the greedy direction and the least-explored eigendirection) and
/// returns the best iterate seen. Not guaranteed to be the global maximizer.
pub fn ucb_on_ball(theta_hat: &DVector<f64>, v: &DMatrix<f64>, v_inv: &DMatrix<f64>, beta: f64) -> DVector<f64> {
    let d = theta_hat.len();
    let eig = v.clone().symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let explore: DVector<f64> = eig.eigenvectors.column(k).into_owned();

    let mut starts = vec![explore.clone(), -explore];
    let n = theta_hat.norm();
    if n > ZERO_THRESHOLD {
        starts.push(theta_hat / n);
    }
    let mut best = starts
        .into_iter()
        .map(|x| (ucb_objective(&x, theta_hat, v_inv, beta), x))
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("nonempty starts");
    if beta == 0.0 {
        return if n > ZERO_THRESHOLD { theta_hat / n } else { DVector::zeros(d) };
    }

    let mut x = best.1.clone();
    for _ in 0..UCB_BALL_ITERATIONS {
        let vx = v_inv * &x;
        let w = x.dot(&vx).max(f64::MIN_POSITIVE).sqrt();
        let grad = theta_hat + vx * (beta / w);
        let gn = grad.norm();
        if gn <= ZERO_THRESHOLD {
            break;
        }
        let next = grad / gn;
        let step = (&next - &x).amax();
        x = next;
        let val = ucb_objective(&x, theta_hat, v_inv, beta);
        if val > best.0 {
            best = (val, x.clone());
        }
        if step < UCB_BALL_TOL {
            break;
        }
    }
    best.1
}
