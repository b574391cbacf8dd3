//! Stochastic linear bandit environments and regret accounting.

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::linalg::ACTION_NORM_SLACK;
use crate::rng::Rng;

/// Parameters with norm at or below this are treated as exactly zero when
/// maximizing over the unit ball, so the learner plays `X_t = 0`.
pub const ZERO_THRESHOLD: f64 = 1e-14;

/// Tolerance for checking that a played action belongs to the action set.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionSet {
    UnitBall { dim: usize },
    FiniteSet { arms: Vec<DVector<f64>> },
}

impl ActionSet {
    pub fn unit_ball(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        Ok(Self::UnitBall { dim })
    }

    pub fn finite(arms: Vec<DVector<f64>>) -> Result<Self> {
        let Some(first) = arms.first() else {
            return Err(domain("finite action set must be nonempty"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(domain("dimension must be at least 1"));
        }
        for (i, a) in arms.iter().enumerate() {
            if a.len() != dim {
                return Err(Error::ShapeMismatch {
                    expected: format!("arm of length {dim}"),
                    got: format!("arm {i} of length {}", a.len()),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("arm"));
            }
            if a.norm() > 1.0 + ACTION_NORM_SLACK {
                return Err(Error::ActionDomain(format!("arm {i} has norm {}", a.norm())));
            }
        }
        Ok(Self::FiniteSet { arms })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::UnitBall { dim } => *dim,
            Self::FiniteSet { arms } => arms[0].len(),
        }
    }

    /// Maximizer of `⟨x, θ⟩`. Ties on a finite set go to the lowest index;
    /// on the ball a (numerically) zero `θ` yields the zero action.
    pub fn argmax(&self, theta: &DVector<f64>) -> DVector<f64> {
        match self {
            Self::UnitBall { dim } => {
                let n = theta.norm();
                if n <= ZERO_THRESHOLD {
                    DVector::zeros(*dim)
                } else {
                    theta / n
                }
            }
            Self::FiniteSet { arms } => arms[argmax_index(arms.iter().map(|a| a.dot(theta)))].clone(),
        }
    }

    /// `max_{x ∈ 𝒳} ⟨x, θ⟩`.
    pub fn max_value(&self, theta: &DVector<f64>) -> f64 {
        match self {
            Self::UnitBall { .. } => theta.norm(),
            Self::FiniteSet { arms } => arms.iter().map(|a| a.dot(theta)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Self::UnitBall { .. } => x.norm() <= 1.0 + MEMBERSHIP_TOL,
            Self::FiniteSet { arms } => arms.iter().any(|a| (a - x).amax() <= MEMBERSHIP_TOL),
        }
    }
}

/// Index of the largest score, lowest index on ties.
pub(crate) fn argmax_index(scores: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, s) in scores.enumerate() {
        if s > best.1 {
            best = (i, s);
        }
    }
    best.0
}

/// Reward-noise law. Every variant is 1-subgaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec {
    Gaussian { sigma: f64 },
    Rademacher,
    /// Uniform on `[-1, 1]`.
    Uniform,
    Zero,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::Gaussian { sigma: 1.0 }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if let Self::Gaussian { sigma } = self {
            if !(0.0..=1.0).contains(sigma) {
                return Err(domain(format!("gaussian noise needs 0 ≤ σ ≤ 1, got {sigma}")));
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            Self::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Uniform => rng.random_range(-1.0..=1.0),
            Self::Zero => 0.0,
        }
    }
}

/// How the hidden parameter is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum ThetaMode {
    Fixed(Vec<f64>),
    SphereUniform,
}

impl ThetaMode {
    pub fn draw(&self, dim: usize, rng: &mut Rng) -> Result<DVector<f64>> {
        match self {
            Self::Fixed(v) if v.len() == dim => Ok(DVector::from_column_slice(v)),
            Self::Fixed(v) => Err(Error::ShapeMismatch {
                expected: format!("theta of length {dim}"),
                got: format!("length {}", v.len()),
            }),
            Self::SphereUniform => Ok(sample_sphere(dim, rng)),
        }
    }
}

/// Uniform draw from the unit sphere in `ℝ^dim`.
pub fn sample_sphere(dim: usize, rng: &mut Rng) -> DVector<f64> {
    loop {
        let g = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = g.norm();
        if n > 0.0 {
            return g / n;
        }
    }
}

#[derive(Debug, Clone)]
pub struct BanditInstance {
    actions: ActionSet,
    theta_star: DVector<f64>,
    noise: NoiseSpec,
}

impl BanditInstance {
    pub fn new(actions: ActionSet, theta_star: DVector<f64>, noise: NoiseSpec) -> Result<Self> {
        if theta_star.len() != actions.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("theta of length {}", actions.dim()),
                got: format!("length {}", theta_star.len()),
            });
        }
        if theta_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("theta_star"));
        }
        if theta_star.norm() > 1.0 + ACTION_NORM_SLACK {
            return Err(domain(format!("‖θ⋆‖ = {} exceeds 1", theta_star.norm())));
        }
        noise.validate()?;
        Ok(Self {
            actions,
            theta_star,
            noise,
        })
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn theta_star(&self) -> &DVector<f64> {
        &self.theta_star
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn dim(&self) -> usize {
        self.actions.dim()
    }

    /// Best action and its mean reward.
    pub fn optimal_action(&self) -> (DVector<f64>, f64) {
        let x = self.actions.argmax(&self.theta_star);
        let value = x.dot(&self.theta_star);
        (x, value)
    }

    /// Plays `x` and returns the noisy reward `⟨x, θ⋆⟩ + η`.
    pub fn step(&self, x: &DVector<f64>, rng: &mut Rng) -> Result<f64> {
        if !self.actions.contains(x) {
            return Err(Error::ActionDomain(format!("{:?} is not in the action set", x.as_slice())));
        }
        Ok(x.dot(&self.theta_star) + self.noise.sample(rng))
    }
}

/// One interaction round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub action: DVector<f64>,
    pub reward: f64,
    /// `⟨x⋆ − X_t, θ⋆⟩`
    pub gap: f64,
    /// Cumulative pseudo-regret `R_t`.
    pub regret: f64,
    /// Confidence radius the learner used to pick `X_t`.
    pub beta: f64,
    pub gamma: f64,
    pub min_exceedance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceMeta {
    pub seed: u64,
    pub rep: u64,
    pub algorithm: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub meta: TraceMeta,
    pub rows: Vec<TraceRow>,
}

impl RunTrace {
    pub fn new(meta: TraceMeta) -> Self {
        Self { meta, rows: Vec::new() }
    }

    pub fn push(&mut self, action: DVector<f64>, reward: f64) -> &mut TraceRow {
        let t = self.rows.len() + 1;
        self.rows.push(TraceRow {
            t,
            action,
            reward,
            gap: 0.0,
            regret: 0.0,
            beta: f64::NAN,
            gamma: f64::NAN,
            min_exceedance: None,
        });
        self.rows.last_mut().expect("just pushed")
    }

    /// Fills per-round gaps and cumulative regret against `instance`.
    pub fn accumulate_regret(&mut self, instance: &BanditInstance) {
        let (_, best) = instance.optimal_action();
        let mut total = 0.0;
        for row in &mut self.rows {
            row.gap = best - row.action.dot(instance.theta_star());
            total += row.gap;
            row.regret = total;
        }
    }

    /// `R_n` for the full trace.
    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// A learner that interacts with a bandit instance.
pub trait Learner {
    fn select(&mut self, actions: &ActionSet, rng: &mut Rng) -> DVector<f64>;

    fn observe(&mut self, x: &DVector<f64>, y: f64, rng: &mut Rng) -> Result<()>;

    /// Confidence radius currently in use.
    fn beta(&self) -> f64;
}

/// Runs `n` rounds. `before_round(t, learner)` sees the learner state after
/// `t − 1` observations, before the round-`t` action is chosen.
pub fn run_episode<L: Learner>(
    instance: &BanditInstance,
    learner: &mut L,
    n: usize,
    learner_rng: &mut Rng,
    env_rng: &mut Rng,
    meta: TraceMeta,
    mut before_round: impl FnMut(usize, &L, &mut Option<f64>),
) -> Result<RunTrace> {
    let mut trace = RunTrace::new(meta);
    trace.rows.reserve(n);
    for t in 1..=n {
        let mut diag = None;
        before_round(t, learner, &mut diag);
        let beta = learner.beta();
        let x = learner.select(instance.actions(), learner_rng);
        let y = instance.step(&x, env_rng)?;
        learner.observe(&x, y, learner_rng)?;
        let row = trace.push(x, y);
        row.beta = beta;
        row.min_exceedance = diag;
    }
    trace.accumulate_regret(instance);
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn rng() -> Rng {
        stream(1, 0, StreamTag::Environment)
    }

    #[test]
    fn optimal_action_on_ball() {
        let inst = BanditInstance::new(ActionSet::unit_ball(2).unwrap(), v(&[0.6, 0.8]), NoiseSpec::Zero).unwrap();
        let (x, val) = inst.optimal_action();
        assert!((x - v(&[0.6, 0.8])).amax() < 1e-15);
        assert!((val - 1.0).abs() < 1e-15);

        let inst = BanditInstance::new(ActionSet::unit_ball(2).unwrap(), v(&[0.0, 0.0]), NoiseSpec::Zero).unwrap();
        let (x, val) = inst.optimal_action();
        assert_eq!(x, v(&[0.0, 0.0]));
        assert_eq!(val, 0.0);
    }

    #[test]
    fn optimal_action_on_finite_set() {
        let arms = ActionSet::finite(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let inst = BanditInstance::new(arms, v(&[0.3, 0.9]), NoiseSpec::Zero).unwrap();
        let (x, val) = inst.optimal_action();
        assert_eq!(x, v(&[0.0, 1.0]));
        assert!((val - 0.9).abs() < 1e-15);
    }

    #[test]
    fn finite_ties_go_to_lowest_index() {
        let arms = ActionSet::finite(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        assert_eq!(arms.argmax(&v(&[0.5, 0.5])), v(&[1.0, 0.0]));
    }

    #[test]
    fn noiseless_steps() {
        let ball = ActionSet::unit_ball(2).unwrap();
        let inst = BanditInstance::new(ball, v(&[1.0, 0.0]), NoiseSpec::Zero).unwrap();
        let mut r = rng();
        assert_eq!(inst.step(&v(&[1.0, 0.0]), &mut r).unwrap(), 1.0);
        assert_eq!(inst.step(&v(&[0.0, 1.0]), &mut r).unwrap(), 0.0);
        assert!(matches!(inst.step(&v(&[1.0, 1.0]), &mut r), Err(Error::ActionDomain(_))));
    }

    #[test]
    fn finite_membership() {
        let arms = ActionSet::finite(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let inst = BanditInstance::new(arms, v(&[0.3, 0.9]), NoiseSpec::Zero).unwrap();
        let mut r = rng();
        assert!(inst.step(&v(&[1.0, 1e-12]), &mut r).is_ok());
        assert!(inst.step(&v(&[0.6, 0.8]), &mut r).is_err());
    }

    #[test]
    fn gaussian_reward_mean() {
        let ball = ActionSet::unit_ball(1).unwrap();
        let inst = BanditInstance::new(ball, v(&[1.0]), NoiseSpec::Gaussian { sigma: 1.0 }).unwrap();
        let mut r = rng();
        let x = v(&[1.0]);
        let n = 1_000_000;
        let mean = (0..n).map(|_| inst.step(&x, &mut r).unwrap()).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn instance_validation() {
        let ball = ActionSet::unit_ball(2).unwrap();
        assert!(BanditInstance::new(ball.clone(), v(&[1.0, 1.0]), NoiseSpec::Zero).is_err());
        assert!(BanditInstance::new(ball.clone(), v(&[1.0]), NoiseSpec::Zero).is_err());
        assert!(BanditInstance::new(ball, v(&[0.1, 0.1]), NoiseSpec::Gaussian { sigma: 1.5 }).is_err());
        assert!(ActionSet::finite(vec![]).is_err());
        assert!(ActionSet::finite(vec![v(&[2.0, 0.0])]).is_err());
        assert!(ActionSet::finite(vec![v(&[1.0, 0.0]), v(&[1.0])]).is_err());
    }

    fn trace_of(actions: &[DVector<f64>]) -> RunTrace {
        let mut tr = RunTrace::default();
        for a in actions {
            tr.push(a.clone(), 0.0);
        }
        tr
    }

    #[test]
    fn regret_of_oracle_and_null_play() {
        let ball = ActionSet::unit_ball(2).unwrap();
        let inst = BanditInstance::new(ball, v(&[0.6, 0.8]), NoiseSpec::Zero).unwrap();
        let (best, _) = inst.optimal_action();
        let mut tr = trace_of(&vec![best; 50]);
        tr.accumulate_regret(&inst);
        assert!(tr.final_regret().abs() < 1e-12);

        let mut tr = trace_of(&vec![v(&[0.0, 0.0]); 50]);
        tr.accumulate_regret(&inst);
        assert!((tr.final_regret() - 50.0).abs() < 1e-12);
        for w in tr.rows.windows(2) {
            assert!(w[1].regret >= w[0].regret);
        }
    }

    #[test]
    fn regret_in_subspace_is_linear() {
        // play the best unit vector inside span{e1}; ‖Π θ⋆‖ = q
        let theta = v(&[0.6, 0.8, 0.0]);
        let ball = ActionSet::unit_ball(3).unwrap();
        let inst = BanditInstance::new(ball, theta, NoiseSpec::Zero).unwrap();
        let q = 0.6;
        let n = 100;
        let mut tr = trace_of(&vec![v(&[1.0, 0.0, 0.0]); n]);
        tr.accumulate_regret(&inst);
        assert!(tr.final_regret() >= n as f64 * (1.0 - q) - 1e-9);
        let summed: f64 = tr.rows.iter().map(|r| r.gap).sum();
        assert!((summed - tr.final_regret()).abs() < 1e-9);
    }

    #[test]
    fn sphere_draws_are_unit() {
        let mut r = rng();
        for _ in 0..100 {
            assert!((sample_sphere(7, &mut r).norm() - 1.0).abs() < 1e-12);
        }
    }
}
