//! Linear ensemble sampling with adaptive noise levels.
//!
//! The ensemble keeps `m` perturbed accumulators
//! `S̃_t^j = √λ ζ^j + Σ_{s≤t} ξ_s^j X_s` next to the usual ridge statistics.
//! Model `j` is `θ_t^j = θ̂_t + γ̄ β_t V_t⁻¹ S̃_t^j`, where `β_t` is the
//! self-normalized confidence radius. Each round draws one model uniformly
//! and acts greedily with respect to it.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::environment::{ActionSet, Learner};
use crate::error::{domain, Result};
use crate::linalg::DesignState;
use crate::rng::Rng;

mod extended;
use extended::ExtendedState;

/// Law of the prior coordinates `ζ^j_i` and the perturbations `ξ_t^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Perturbation {
    #[default]
    StandardNormal,
    Rademacher,
    Zero,
}

impl Perturbation {
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Self::StandardNormal => StandardNormal.sample(rng),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Zero => 0.0,
        }
    }
}

/// Arithmetic used for the ensemble statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    #[default]
    Double,
    /// Double-double shadow state; the public `f64` views are its roundings.
    Extended,
}

/// How the confidence radius `β_t` is maintained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BetaMode {
    /// Recomputed from `log det V_t` after every round.
    #[default]
    Adaptive,
    /// Fixed at the elliptical-potential upper bound for the given horizon.
    FixedUpperBound { horizon: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub m: usize,
    pub gamma_bar: f64,
    pub lambda: f64,
    pub delta: f64,
    pub prior: Perturbation,
    pub perturbation: Perturbation,
    pub beta_mode: BetaMode,
    /// Keep every prior and perturbation draw (for replay checks).
    pub log_draws: bool,
    pub precision: Precision,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            m: 32,
            gamma_bar: 40.0,
            lambda: 80.0,
            delta: 0.1,
            prior: Perturbation::StandardNormal,
            perturbation: Perturbation::StandardNormal,
            beta_mode: BetaMode::Adaptive,
            log_draws: false,
            precision: Precision::Double,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(domain("ensemble size m must be at least 1"));
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar.is_finite()) {
            return Err(domain(format!("gamma_bar must be positive, got {}", self.gamma_bar)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(domain(format!("lambda must be positive, got {}", self.lambda)));
        }
        check_delta(self.delta)
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("delta must lie in (0, 1), got {delta}")))
    }
}

/// Confidence radius `√λ + √(2 log(1/δ) + log det V − d log λ)`.
pub fn beta_formula(design: &DesignState, delta: f64) -> f64 {
    let d = design.dim() as f64;
    let lambda = design.lambda();
    let excess = (design.log_det() - d * lambda.ln()).max(0.0);
    lambda.sqrt() + (2.0 * (1.0 / delta).ln() + excess).sqrt()
}

/// Elliptical-potential bound on the radius after `t` unit-norm actions.
pub fn beta_upper(t: usize, d: usize, lambda: f64, delta: f64) -> f64 {
    beta_upper_real(t as f64, d, lambda, delta)
}

pub(crate) fn beta_upper_real(t: f64, d: usize, lambda: f64, delta: f64) -> f64 {
    let d = d as f64;
    lambda.sqrt() + (2.0 * (1.0 / delta).ln() + d * (t / (lambda * d)).ln_1p()).sqrt()
}

/// High-probability bound on `max_j ‖S̃_t^j‖_{V_t⁻¹}`:
/// `√d + √log(4m/δ) + √(2 log(4m/δ) + d log(1 + t/(λd)))`.
pub fn gamma_formula(t: usize, d: usize, m: usize, lambda: f64, delta: f64) -> f64 {
    let df = d as f64;
    let x = (4.0 * m as f64 / delta).ln();
    df.sqrt() + x.sqrt() + (2.0 * x + df * (t as f64 / (lambda * df)).ln_1p()).sqrt()
}

/// Regret bound implied by a uniform exceedance frequency `p`, evaluated with
/// the deterministic radius bound in place of the realized `β_{t−1}`.
pub fn exceedance_regret_bound(
    t: usize,
    d: usize,
    m: usize,
    lambda: f64,
    delta: f64,
    gamma_bar: f64,
    p: f64,
) -> f64 {
    let tf = t as f64;
    let df = d as f64;
    let prev = t.saturating_sub(1);
    let gamma = gamma_formula(prev, d, m, lambda, delta);
    let beta = beta_upper(prev, d, lambda, delta);
    let potential = 2.0 * (2.0 * df * tf * (tf / (df * lambda)).ln_1p()).sqrt();
    let w = 4.0 * tf / lambda + 1.0;
    let martingale = (2.0 * w * (w.sqrt() / delta).ln()).sqrt();
    2.0 * gamma_bar / p * gamma * beta * (potential + martingale)
}

/// The model chosen for one round.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDraw {
    /// Zero-based ensemble index `J_t`.
    pub index: usize,
    pub theta: DVector<f64>,
}

/// Every random draw the ensemble consumed.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawLog {
    /// `m × d`, row `j` is `ζ^j`.
    pub prior: DMatrix<f64>,
    /// One length-`m` vector `(ξ_t^1, …, ξ_t^m)` per update.
    pub perturbations: Vec<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct EnsembleState {
    config: EnsembleConfig,
    design: DesignState,
    s_data: DVector<f64>,
    theta_hat: DVector<f64>,
    s_tilde: DMatrix<f64>,
    beta: f64,
    log: Option<DrawLog>,
    extended: Option<ExtendedState>,
}

impl EnsembleState {
    pub fn new(config: EnsembleConfig, dim: usize, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let design = DesignState::new(dim, config.lambda)?;
        let zeta = DMatrix::from_fn(config.m, dim, |_, _| config.prior.sample(rng));
        let s_tilde = &zeta * config.lambda.sqrt();
        let extended = (config.precision == Precision::Extended).then(|| ExtendedState::new(&zeta, config.lambda));
        let log = config.log_draws.then(|| DrawLog {
            prior: zeta,
            perturbations: Vec::new(),
        });
        let beta = match config.beta_mode {
            BetaMode::Adaptive => beta_formula(&design, config.delta),
            BetaMode::FixedUpperBound { horizon } => beta_upper(horizon, dim, config.lambda, config.delta),
        };
        Ok(Self {
            design,
            s_data: DVector::zeros(dim),
            theta_hat: DVector::zeros(dim),
            s_tilde,
            beta,
            log,
            extended,
            config,
        })
    }

    pub fn config(&self) -> &EnsembleConfig {
        &self.config
    }

    pub fn design(&self) -> &DesignState {
        &self.design
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    pub fn m(&self) -> usize {
        self.config.m
    }

    pub fn round(&self) -> usize {
        self.design.rounds()
    }

    pub fn s_data(&self) -> &DVector<f64> {
        &self.s_data
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    /// `m × d`, row `j` is `S̃^j`.
    pub fn s_tilde(&self) -> &DMatrix<f64> {
        &self.s_tilde
    }

    pub fn accumulator(&self, j: usize) -> DVector<f64> {
        self.s_tilde.row(j).transpose()
    }

    pub fn current_beta(&self) -> f64 {
        self.beta
    }

    pub fn draw_log(&self) -> Option<&DrawLog> {
        self.log.as_ref()
    }

    /// `θ^j = θ̂ + γ̄ β V⁻¹ S̃^j`.
    pub fn model(&self, j: usize) -> DVector<f64> {
        if let Some(ext) = &self.extended {
            return ext.model_f64(j, self.config.gamma_bar * self.beta);
        }
        let offset = self.design.solve(&self.accumulator(j));
        &self.theta_hat + offset * (self.config.gamma_bar * self.beta)
    }

    /// All `m` models as rows of an `m × d` matrix.
    pub fn models(&self) -> DMatrix<f64> {
        let scale = self.config.gamma_bar * self.beta;
        if let Some(ext) = &self.extended {
            let mut out = DMatrix::zeros(self.m(), self.dim());
            for j in 0..self.m() {
                out.set_row(j, &ext.model_f64(j, scale).transpose());
            }
            return out;
        }
        // rows of S̃ V⁻¹ are (V⁻¹ S̃^j)ᵀ since V⁻¹ is symmetric
        let mut out = &self.s_tilde * self.design.v_inv() * scale;
        for mut row in out.row_iter_mut() {
            row += self.theta_hat.transpose();
        }
        out
    }

    pub fn draw_and_select(&self, actions: &ActionSet, rng: &mut Rng) -> (ModelDraw, DVector<f64>) {
        let (draw, x, _) = self.choose(actions, rng);
        (draw, x)
    }

    fn choose(&self, actions: &ActionSet, rng: &mut Rng) -> (ModelDraw, DVector<f64>, Option<Vec<twofloat::TwoFloat>>) {
        let index = if self.config.m == 1 {
            0
        } else {
            rng.random_range(0..self.config.m)
        };
        match &self.extended {
            Some(ext) => {
                let exact = ext.model(index, self.config.gamma_bar * self.beta);
                let (x, exact_x) = ext.act(actions, &exact);
                let theta = DVector::from_iterator(exact.len(), exact.iter().map(|v| v.hi() + v.lo()));
                (ModelDraw { index, theta }, x, Some(exact_x))
            }
            None => {
                let theta = self.model(index);
                let x = actions.argmax(&theta);
                (ModelDraw { index, theta }, x, None)
            }
        }
    }

    /// Absorbs the round's action and reward and refreshes every model.
    pub fn update(&mut self, x: &DVector<f64>, y: f64, rng: &mut Rng) -> Result<()> {
        self.design.rank_one_update(x)?;
        let xi = DVector::from_fn(self.config.m, |_, _| self.config.perturbation.sample(rng));
        if let Some(ext) = self.extended.as_mut() {
            ext.update(x, y, &xi);
            self.s_data = ext.s_data();
            self.theta_hat = ext.theta_hat();
            self.s_tilde = ext.s_tilde(self.config.m);
        } else {
            self.s_data.axpy(y, x, 1.0);
            self.theta_hat = self.design.solve(&self.s_data);
            for (k, xk) in x.iter().enumerate() {
                if *xk != 0.0 {
                    self.s_tilde.column_mut(k).axpy(*xk, &xi, 1.0);
                }
            }
        }
        if let Some(log) = self.log.as_mut() {
            log.perturbations.push(xi);
        }

        if self.config.beta_mode == BetaMode::Adaptive {
            self.beta = beta_formula(&self.design, self.config.delta);
        }
        Ok(())
    }
}

impl Learner for EnsembleState {
    fn select(&mut self, actions: &ActionSet, rng: &mut Rng) -> DVector<f64> {
        let (_, x, exact) = self.choose(actions, rng);
        if let (Some(ext), Some(exact)) = (self.extended.as_mut(), exact) {
            ext.remember(x.clone(), exact);
        }
        x
    }

    fn observe(&mut self, x: &DVector<f64>, y: f64, rng: &mut Rng) -> Result<()> {
        self.update(x, y, rng)
    }

    fn beta(&self) -> f64 {
        self.beta
    }
}
