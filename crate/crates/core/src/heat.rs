//! Closed-form heat flow of an empirical measure and the scores derived from it.
//!
//! For `u0 = Σ w_k δ_{x_k}` the heat flow is the Gaussian mixture
//! `u(x,t) = Σ w_k (4πt)^{-d/2} exp(-|x - x_k|²/(4t))`. Everything here is
//! evaluated through one shifted log-sum-exp kernel keyed on
//! `E_k = |x - x_k|²/(4t)`, so `t` can go down to `1e-12` without overflow.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::f64::consts::PI;

use crate::error::{check_dim, check_time, Error, Result};
use crate::measures::EmpiricalMeasure;
use crate::vecops;

/// Terms with `E_k - E_min` above this underflow to zero in double precision.
pub const SOFTMAX_CUTOFF: f64 = 745.0;

/// Shifted softmax over the support at `(x, t)`.
struct Posterior {
    /// `log Σ w_k exp(-(E_k - E_min))`
    log_mass: f64,
    e_min: f64,
    /// Unnormalized terms `w_k exp(-(E_k - E_min))` (zero past the cutoff).
    terms: Vec<f64>,
    mass: f64,
}

fn posterior(measure: &EmpiricalMeasure, x: &[f64], t: f64) -> Posterior {
    let inv = 1.0 / (4.0 * t);
    let energies: Vec<f64> = measure.points().map(|p| vecops::dist_sq(x, p) * inv).collect();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let terms: Vec<f64> = energies
        .iter()
        .zip(measure.weights())
        .map(|(&e, &w)| {
            let gap = e - e_min;
            if gap > SOFTMAX_CUTOFF {
                0.0
            } else {
                w * (-gap).exp()
            }
        })
        .collect();
    let mass: f64 = terms.iter().sum();
    Posterior { log_mass: mass.ln(), e_min, terms, mass }
}

fn log_density_from(measure: &EmpiricalMeasure, post: &Posterior, t: f64) -> f64 {
    -(measure.dim() as f64 / 2.0) * (4.0 * PI * t).ln() - post.e_min + post.log_mass
}

fn barycenter_from(measure: &EmpiricalMeasure, post: &Posterior) -> Vec<f64> {
    let mut m = alloc::vec![0.0; measure.dim()];
    for (p, &a) in measure.points().zip(&post.terms) {
        if a > 0.0 {
            let pk = a / post.mass;
            for (mj, pj) in m.iter_mut().zip(p) {
                *mj += pk * pj;
            }
        }
    }
    m
}

pub(crate) fn barycenter_unchecked(measure: &EmpiricalMeasure, x: &[f64], t: f64) -> Vec<f64> {
    barycenter_from(measure, &posterior(measure, x, t))
}

fn check(measure: &EmpiricalMeasure, x: &[f64], t: f64) -> Result<()> {
    check_dim(measure.dim(), x.len())?;
    check_time(t)
}

/// `log u(x, t)` for the heat flow started from `measure`.
pub fn log_heat_density(measure: &EmpiricalMeasure, x: &[f64], t: f64) -> Result<f64> {
    check(measure, x, t)?;
    let post = posterior(measure, x, t);
    Ok(log_density_from(measure, &post, t))
}

/// Gaussian-posterior barycenter `m(x,t) = Σ p_k(x,t) x_k`.
pub fn barycenter(measure: &EmpiricalMeasure, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check(measure, x, t)?;
    Ok(barycenter_unchecked(measure, x, t))
}

/// Exact score `∇ log u = (m(x,t) - x) / (2t)`.
pub fn score(measure: &EmpiricalMeasure, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check(measure, x, t)?;
    Ok(score_from_barycenter(&barycenter_unchecked(measure, x, t), x, t))
}

fn score_from_barycenter(m: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    let inv = 1.0 / (2.0 * t);
    m.iter().zip(x).map(|(mj, xj)| (mj - xj) * inv).collect()
}

/// `m(x,t) - x_anchor` evaluated without cancellation, as
/// `Σ_{k≠anchor} p_k (x_k - x_anchor)`.
///
/// When `anchor` is the unique nearest point this offset is exponentially
/// small in `1/t`, far below what `m - x_anchor` can resolve.
pub fn barycenter_offset(
    measure: &EmpiricalMeasure,
    x: &[f64],
    t: f64,
    anchor: usize,
) -> Result<Vec<f64>> {
    check(measure, x, t)?;
    if anchor >= measure.len() {
        return Err(Error::param("anchor", "index out of range"));
    }
    let post = posterior(measure, x, t);
    let a = measure.point(anchor);
    let mut off = alloc::vec![0.0; measure.dim()];
    for (k, (p, &w)) in measure.points().zip(&post.terms).enumerate() {
        if k == anchor || w == 0.0 {
            continue;
        }
        let pk = w / post.mass;
        for j in 0..off.len() {
            off[j] += pk * (p[j] - a[j]);
        }
    }
    Ok(off)
}

/// Mixing regime selected by `lambda`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Regime {
    /// `0 <= lambda <= 1`
    MixtureOfExperts,
    /// `lambda > 1`
    Guidance,
}

/// Two data measures mixed with weight `lambda`, horizon `T` and noise level `epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedScoreModel {
    mu1: EmpiricalMeasure,
    mu2: EmpiricalMeasure,
    lambda: f64,
    horizon: f64,
    epsilon: f64,
}

impl MixedScoreModel {
    pub fn new(
        mu1: EmpiricalMeasure,
        mu2: EmpiricalMeasure,
        lambda: f64,
        horizon: f64,
        epsilon: f64,
    ) -> Result<Self> {
        check_dim(mu1.dim(), mu2.dim())?;
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::param("lambda", "must be finite and nonnegative"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::param("horizon", "must be finite and positive"));
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::param("epsilon", "must be finite and nonnegative"));
        }
        Ok(Self { mu1, mu2, lambda, horizon, epsilon })
    }

    pub fn mu1(&self) -> &EmpiricalMeasure {
        &self.mu1
    }

    pub fn mu2(&self) -> &EmpiricalMeasure {
        &self.mu2
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.mu1.dim()
    }

    pub fn regime(&self) -> Regime {
        if self.lambda <= 1.0 {
            Regime::MixtureOfExperts
        } else {
            Regime::Guidance
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.mu1.clone(), self.mu2.clone(), lambda, self.horizon, self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.mu1.clone(), self.mu2.clone(), self.lambda, self.horizon, epsilon)
    }

    /// Whether measure `i ∈ {1, 2}` carries a nonzero coefficient.
    pub fn is_active(&self, i: usize) -> bool {
        match i {
            1 => self.lambda != 0.0,
            _ => self.lambda != 1.0,
        }
    }

    fn check(&self, x: &[f64], t: f64) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        check_time(t)
    }

    /// `λ s_1 + (1-λ) s_2`
    pub fn mixed_score(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check(x, t)?;
        let s1 = score(&self.mu1, x, t)?;
        let s2 = score(&self.mu2, x, t)?;
        let (a, b) = (self.lambda, 1.0 - self.lambda);
        Ok(s1.iter().zip(&s2).map(|(u, v)| a * u + b * v).collect())
    }

    /// `V_λ = λ log u_1 + (1-λ) log u_2`
    pub fn log_product_potential(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check(x, t)?;
        let l1 = log_heat_density(&self.mu1, x, t)?;
        let l2 = log_heat_density(&self.mu2, x, t)?;
        Ok(self.lambda * l1 + (1.0 - self.lambda) * l2)
    }

    /// `F_λ(x,t) = -4t (λ log u_1 + (1-λ) log u_2)`, assembled from log densities.
    pub fn rescaled_potential(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check(x, t)?;
        Ok(self.rescaled_potential_unchecked(x, t))
    }

    pub(crate) fn rescaled_potential_unchecked(&self, x: &[f64], t: f64) -> f64 {
        let l1 = log_density_from(&self.mu1, &posterior(&self.mu1, x, t), t);
        let l2 = log_density_from(&self.mu2, &posterior(&self.mu2, x, t), t);
        -4.0 * t * (self.lambda * l1 + (1.0 - self.lambda) * l2)
    }

    /// `∇F_λ = 2(x - λ m_1 - (1-λ) m_2)`
    pub fn grad_rescaled_potential(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check(x, t)?;
        Ok(self.grad_rescaled_potential_unchecked(x, t))
    }

    pub(crate) fn grad_rescaled_potential_unchecked(&self, x: &[f64], t: f64) -> Vec<f64> {
        let m1 = barycenter_unchecked(&self.mu1, x, t);
        let m2 = barycenter_unchecked(&self.mu2, x, t);
        grad_from_barycenters(self.lambda, x, &m1, &m2)
    }

    /// Every score quantity at `(x, t)` from a single pass over each support.
    pub fn evaluate_all(&self, x: &[f64], t: f64) -> Result<ScoreEvaluation> {
        self.check(x, t)?;
        let p1 = posterior(&self.mu1, x, t);
        let p2 = posterior(&self.mu2, x, t);
        let log_u1 = log_density_from(&self.mu1, &p1, t);
        let log_u2 = log_density_from(&self.mu2, &p2, t);
        let m1 = barycenter_from(&self.mu1, &p1);
        let m2 = barycenter_from(&self.mu2, &p2);
        let score1 = score_from_barycenter(&m1, x, t);
        let score2 = score_from_barycenter(&m2, x, t);
        let (a, b) = (self.lambda, 1.0 - self.lambda);
        let mixed_score = score1.iter().zip(&score2).map(|(u, v)| a * u + b * v).collect();
        let f_lambda = -4.0 * t * (a * log_u1 + b * log_u2);
        let grad_f_lambda = grad_from_barycenters(self.lambda, x, &m1, &m2);
        Ok(ScoreEvaluation {
            log_u1,
            log_u2,
            score1,
            score2,
            mixed_score,
            m1,
            m2,
            f_lambda,
            grad_f_lambda,
            lambda: self.lambda,
            horizon: self.horizon,
            epsilon: self.epsilon,
        })
    }
}

pub(crate) fn grad_from_barycenters(lambda: f64, x: &[f64], m1: &[f64], m2: &[f64]) -> Vec<f64> {
    let b = 1.0 - lambda;
    x.iter()
        .zip(m1.iter().zip(m2))
        .map(|(xj, (aj, cj))| 2.0 * (xj - lambda * aj - b * cj))
        .collect()
}

/// Bundle of every score-related quantity at one `(x, t)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreEvaluation {
    pub log_u1: f64,
    pub log_u2: f64,
    pub score1: Vec<f64>,
    pub score2: Vec<f64>,
    pub mixed_score: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub f_lambda: f64,
    pub grad_f_lambda: Vec<f64>,
    pub lambda: f64,
    pub horizon: f64,
    pub epsilon: f64,
}
