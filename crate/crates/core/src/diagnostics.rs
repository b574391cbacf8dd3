//! Probes of ensemble state used to check the exploration analysis:
//! exceedance frequencies of the self-normalized accumulators, direction
//! nets, Lipschitz spot checks, optimism rates, and span invariance.

use nalgebra::{DMatrix, DVector};

use crate::ensemble::EnsembleState;
use crate::environment::{sample_sphere, BanditInstance, RunTrace};
use crate::error::{domain, Error, Result};
use crate::linalg::NormKind;
use crate::rng::Rng;

/// Size of the random direction net used when `d > 2`.
pub const DEFAULT_RANDOM_NET: usize = 4096;

/// Rank tolerance for orthonormalizing prior vectors.
pub const RANK_TOL: f64 = 1e-10;

/// Exceedance frequency `E_{t,m}(u, c) = (1/m) #{j : ⟨u, S̃^j⟩ / ‖u‖_V ≥ c}`
/// for the current accumulators and design matrix.
pub fn exceedance(state: &EnsembleState, u: &DVector<f64>, c: f64) -> Result<f64> {
    let norm = state.design().weighted_norm(u, NormKind::Design)?;
    if norm == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let proj = state.s_tilde() * u;
    let count = proj.iter().filter(|p| *p / norm >= c).count();
    Ok(count as f64 / state.m() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetKind {
    AngularGrid,
    RandomSphere,
}

/// A finite set of unit directions standing in for the sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionNet {
    pub eps: f64,
    pub directions: Vec<DVector<f64>>,
    pub kind: NetKind,
}

impl DirectionNet {
    /// `⌈2π/ε⌉` equally spaced directions on the circle.
    pub fn angular_grid(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(domain(format!("net radius must be positive, got {eps}")));
        }
        let k = (std::f64::consts::TAU / eps).ceil() as usize;
        let directions = (0..k)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / k as f64;
                DVector::from_column_slice(&[a.cos(), a.sin()])
            })
            .collect();
        Ok(Self {
            eps,
            directions,
            kind: NetKind::AngularGrid,
        })
    }

    /// `count` uniform random unit vectors. This does not certify an
    /// `ε`-covering; minima over it under-estimate nothing and may
    /// over-estimate the true infimum over the sphere.
    pub fn random_sphere(dim: usize, count: usize, eps: f64, rng: &mut Rng) -> Result<Self> {
        if dim == 0 || count == 0 {
            return Err(domain("random net needs dim >= 1 and count >= 1"));
        }
        Ok(Self {
            eps,
            directions: (0..count).map(|_| sample_sphere(dim, rng)).collect(),
            kind: NetKind::RandomSphere,
        })
    }

    /// Angular grid for `d = 2`, otherwise [`DEFAULT_RANDOM_NET`] random directions.
    pub fn for_dim(dim: usize, eps: f64, rng: &mut Rng) -> Result<Self> {
        if dim == 2 {
            Self::angular_grid(eps)
        } else {
            Self::random_sphere(dim, DEFAULT_RANDOM_NET, eps, rng)
        }
    }
}

/// Exceedance frequencies along every net direction.
#[derive(Debug, Clone, PartialEq)]
pub struct ExceedanceReport {
    pub t: usize,
    pub c: f64,
    pub fractions: Vec<(DVector<f64>, f64)>,
    pub min_fraction: f64,
}

pub fn exceedance_report(state: &EnsembleState, net: &DirectionNet, c: f64) -> Result<ExceedanceReport> {
    if net.directions.is_empty() {
        return Err(domain("direction net is empty"));
    }
    let fractions = net
        .directions
        .iter()
        .map(|u| exceedance(state, u, c).map(|f| (u.clone(), f)))
        .collect::<Result<Vec<_>>>()?;
    let min_fraction = fractions.iter().map(|(_, f)| *f).fold(f64::INFINITY, f64::min);
    Ok(ExceedanceReport {
        t: state.round() + 1,
        c,
        fractions,
        min_fraction,
    })
}

pub fn min_exceedance_over_net(state: &EnsembleState, net: &DirectionNet, c: f64) -> Result<f64> {
    Ok(exceedance_report(state, net, c)?.min_fraction)
}

/// `max_j |f_j(u) − f_j(v)| / ‖u − v‖` with `f_j(w) = ⟨w, S̃^j⟩ / ‖w‖_V`.
pub fn lipschitz_probe(state: &EnsembleState, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    let dist = (u - v).norm();
    if dist == 0.0 {
        return Ok(0.0);
    }
    let nu = state.design().weighted_norm(u, NormKind::Design)?;
    let nv = state.design().weighted_norm(v, NormKind::Design)?;
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let fu = state.s_tilde() * u / nu;
    let fv = state.s_tilde() * v / nv;
    Ok((fu - fv).amax() / dist)
}

/// Lipschitz constant `2γ√(1 + n/λ)` valid when every
/// `‖S̃^j‖_{V⁻¹} ≤ γ`.
pub fn lipschitz_constant(gamma: f64, n: usize, lambda: f64) -> f64 {
    2.0 * gamma * (1.0 + n as f64 / lambda).sqrt()
}

/// `max_j ‖S̃^j‖_{V⁻¹}`.
pub fn max_self_normalized_norm(state: &EnsembleState) -> f64 {
    let v_inv = state.design().v_inv();
    state
        .s_tilde()
        .row_iter()
        .map(|row| (row * v_inv * row.transpose())[(0, 0)].max(0.0).sqrt())
        .fold(0.0, f64::max)
}

/// Fraction of ensemble members whose optimal value is at least the true
/// optimal value. This is the probability of optimism given the current
/// ensemble snapshot.
pub fn optimism_rate(state: &EnsembleState, instance: &BanditInstance) -> f64 {
    let (_, best) = instance.optimal_action();
    let models = state.models();
    let optimistic = models
        .row_iter()
        .filter(|row| instance.actions().max_value(&row.transpose()) >= best)
        .count();
    optimistic as f64 / state.m() as f64
}

/// Orthonormal basis (as columns) of the span of the rows of `vectors`.
pub fn span_basis(vectors: &DMatrix<f64>) -> DMatrix<f64> {
    let d = vectors.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for row in vectors.row_iter() {
        let mut w: DVector<f64> = row.transpose();
        let scale = w.norm().max(1.0);
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for b in &basis {
                let c = b.dot(&w);
                w.axpy(-c, b, 1.0);
            }
        }
        let n = w.norm();
        if n > RANK_TOL * scale && basis.len() < d {
            basis.push(w / n);
        }
    }
    if basis.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&basis)
    }
}

fn project(basis: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return DVector::zeros(x.len());
    }
    basis * (basis.transpose() * x)
}

/// `‖Π_U θ‖²` where `U` is the span of the rows of `zetas`.
pub fn span_projection(zetas: &DMatrix<f64>, theta: &DVector<f64>) -> f64 {
    project(&span_basis(zetas), theta).norm_squared()
}

/// `max_t ‖X_t − Π_U X_t‖` over a trace.
pub fn span_residual(trace: &RunTrace, zetas: &DMatrix<f64>) -> f64 {
    let basis = span_basis(zetas);
    trace
        .rows
        .iter()
        .map(|r| (&r.action - project(&basis, &r.action)).norm())
        .fold(0.0, f64::max)
}
