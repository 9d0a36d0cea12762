//! Integrators for the backward generation dynamics and their limiting inclusion.
//!
//! Similarity time `τ = log(T/t)` turns the singular limit `t → 0⁺` into
//! `τ → ∞`. The rescaled flow is `Ẏ = -¼ ∇F_λ(Y, T e^{-τ})`; its limit is the
//! autonomous inclusion `Ż ∈ -¼ ∂Φ_λ(Z)`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{self, SearchBox};
use crate::heat::MixedScoreModel;
use crate::linalg;
use crate::vecops;

/// Default lower end `t_min` of the physical time window.
pub const DEFAULT_T_MIN: f64 = 1e-4;
pub const DEFAULT_DTAU: f64 = 1e-2;
pub const DEFAULT_SLIDING_TOL: f64 = 1e-7;

/// Salt separating initial-state streams from noise streams.
const INIT_SALT: u64 = 0x5bd1_e995_9e37_79b9;
/// Cap on event-clipped substeps inside one macro step.
const MAX_SUBSTEPS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TrajectoryMode {
    PhysicalOde,
    SimilarityOde,
    SimilaritySde,
    LimitInclusion,
}

impl TrajectoryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TrajectoryMode::PhysicalOde => "physical_ode",
            TrajectoryMode::SimilarityOde => "similarity_ode",
            TrajectoryMode::SimilaritySde => "similarity_sde",
            TrajectoryMode::LimitInclusion => "limit_inclusion",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrajectoryMeta {
    pub lambda: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub dtau: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Trajectory {
    /// `τ` for similarity modes; physical time `t` (decreasing) for the physical ODE.
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// `‖dY/dτ‖²` per step, one entry fewer than `states`.
    pub drift_norm_sq: Option<Vec<f64>>,
    pub mode: TrajectoryMode,
    pub meta: TrajectoryMeta,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn terminal(&self) -> &[f64] {
        self.states.last().map(|s| s.as_slice()).unwrap_or(&[])
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, |s| s.len())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    Euler,
    /// Classical Runge–Kutta, for reference solutions of the rescaled ODE.
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SlidingRule {
    /// Event-clipped steps with tangential min-norm selection on interfaces.
    Project,
    /// Plain Euler on the lowest-index cell field.
    Chatter,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IntegratorConfig {
    pub dtau: f64,
    pub tau_max: f64,
    pub seed: u64,
    /// Absolute tolerance on squared-distance ties.
    pub sliding_tol: f64,
    pub scheme: Scheme,
    pub sliding: SlidingRule,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::for_horizon(1.0, DEFAULT_T_MIN)
    }
}

impl IntegratorConfig {
    /// `τ_max = log(T / t_min)` at the default step.
    pub fn for_horizon(horizon: f64, t_min: f64) -> Self {
        Self {
            dtau: DEFAULT_DTAU,
            tau_max: (horizon / t_min).ln(),
            seed: 0,
            sliding_tol: DEFAULT_SLIDING_TOL,
            scheme: Scheme::Euler,
            sliding: SlidingRule::Project,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dtau > 0.0 && self.dtau.is_finite()) {
            return Err(Error::param("dtau", "must be finite and positive"));
        }
        if !(self.tau_max > 0.0 && self.tau_max.is_finite()) {
            return Err(Error::param("tau_max", "must be finite and positive"));
        }
        if !(self.sliding_tol >= 0.0) {
            return Err(Error::param("sliding_tol", "must be nonnegative"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        ((self.tau_max / self.dtau).round() as usize).max(1)
    }

    fn meta(&self, model: &MixedScoreModel, dtau: f64, seed: u64) -> TrajectoryMeta {
        TrajectoryMeta {
            lambda: model.lambda(),
            horizon: model.horizon(),
            epsilon: model.epsilon(),
            dtau,
            seed,
        }
    }
}

fn check_start(model: &MixedScoreModel, x: &[f64]) -> Result<()> {
    check_dim(model.dim(), x.len())?;
    if !vecops::all_finite(x) {
        return Err(Error::NonFinitePoint { index: 0 });
    }
    Ok(())
}

/// `y - h c ∇F(y, t)`, returning the new state and `‖c ∇F‖²`.
fn drift_step(model: &MixedScoreModel, y: &[f64], t: f64, coef: f64, h: f64) -> (Vec<f64>, f64) {
    let g = model.grad_rescaled_potential_unchecked(y, t);
    let mut sq = 0.0;
    let next = y
        .iter()
        .zip(&g)
        .map(|(yi, gi)| {
            let v = coef * gi;
            sq += v * v;
            yi - h * v
        })
        .collect();
    (next, sq)
}

fn rescaled_field(model: &MixedScoreModel, y: &[f64], tau: f64) -> Vec<f64> {
    let t = model.horizon() * (-tau).exp();
    vecops::scale(&model.grad_rescaled_potential_unchecked(y, t), -0.25)
}

fn rk4_step(model: &MixedScoreModel, y: &[f64], tau: f64, h: f64) -> Vec<f64> {
    let k1 = rescaled_field(model, y, tau);
    let k2 = rescaled_field(model, &vecops::axpy(y, 0.5 * h, &k1), tau + 0.5 * h);
    let k3 = rescaled_field(model, &vecops::axpy(y, 0.5 * h, &k2), tau + 0.5 * h);
    let k4 = rescaled_field(model, &vecops::axpy(y, h, &k3), tau + h);
    (0..y.len())
        .map(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
        .collect()
}

/// Rescaled ODE `Ẏ = -¼ ∇F_λ(Y, T e^{-τ})` from `Y₀ = x_T`.
pub fn simulate_similarity_ode(
    model: &MixedScoreModel,
    x_t: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(model, x_t)?;
    let n = cfg.n_steps();
    let h = cfg.dtau;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut drift = Vec::with_capacity(n);
    let mut y = x_t.to_vec();
    times.push(0.0);
    states.push(y.clone());
    for step in 0..n {
        let tau = step as f64 * h;
        let t = model.horizon() * (-tau).exp();
        let next = match cfg.scheme {
            Scheme::Euler => {
                let (next, sq) = drift_step(model, &y, t, 0.25, h);
                drift.push(sq);
                next
            }
            Scheme::Rk4 => {
                drift.push(vecops::norm_sq(&rescaled_field(model, &y, tau)));
                rk4_step(model, &y, tau, h)
            }
        };
        if !vecops::all_finite(&next) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
        y = next;
        times.push((step + 1) as f64 * h);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times,
        states,
        drift_norm_sq: Some(drift),
        mode: TrajectoryMode::SimilarityOde,
        meta: cfg.meta(model, h, cfg.seed),
        warnings: Vec::new(),
    })
}

/// Characteristic ODE in physical time, from `t = T` down to `t_min` on a
/// log-uniform grid, stepping `X ← X + t_n Δτ s_λ(X, t_n)`.
pub fn simulate_physical_ode(
    model: &MixedScoreModel,
    x_t: &[f64],
    t_min: f64,
    n_steps: usize,
) -> Result<Trajectory> {
    check_start(model, x_t)?;
    let horizon = model.horizon();
    if !(t_min > 0.0 && t_min < horizon) {
        return Err(Error::param("t_min", "must satisfy 0 < t_min < T"));
    }
    if n_steps == 0 {
        return Err(Error::param("n_steps", "must be at least 1"));
    }
    let dtau = (horizon / t_min).ln() / n_steps as f64;
    let meta = TrajectoryMeta {
        lambda: model.lambda(),
        horizon,
        epsilon: model.epsilon(),
        dtau,
        seed: 0,
    };
    if n_steps == 1 {
        return Ok(Trajectory {
            times: vec![horizon],
            states: vec![x_t.to_vec()],
            drift_norm_sq: None,
            mode: TrajectoryMode::PhysicalOde,
            meta,
            warnings: vec![String::from("n_steps = 1 is degenerate; returned the initial state only")],
        });
    }
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut drift = Vec::with_capacity(n_steps);
    let mut x = x_t.to_vec();
    times.push(horizon);
    states.push(x.clone());
    for step in 0..n_steps {
        let t = horizon * (-(step as f64) * dtau).exp();
        let s = model.mixed_score(&x, t)?;
        let k = t * dtau;
        drift.push(t * t * vecops::norm_sq(&s));
        let next: Vec<f64> = x.iter().zip(&s).map(|(xi, si)| xi + k * si).collect();
        if !vecops::all_finite(&next) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
        x = next;
        times.push(horizon * (-((step + 1) as f64) * dtau).exp());
        states.push(x.clone());
    }
    Ok(Trajectory {
        times,
        states,
        drift_norm_sq: Some(drift),
        mode: TrajectoryMode::PhysicalOde,
        meta,
        warnings: Vec::new(),
    })
}

/// Euler–Maruyama for `dY = -((1+ε)/4)∇F_λ dτ + √(2εT) e^{-τ/2} dW`, path 0.
pub fn simulate_similarity_sde(
    model: &MixedScoreModel,
    x_t: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    simulate_similarity_sde_path(model, x_t, cfg, 0)
}

/// Noise stream of path `i` is seeded with `seed + i`.
pub fn simulate_similarity_sde_path(
    model: &MixedScoreModel,
    x_t: &[f64],
    cfg: &IntegratorConfig,
    path: u64,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(model, x_t)?;
    let seed = cfg.seed.wrapping_add(path);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = model.epsilon();
    let coef = (1.0 + eps) * 0.25;
    let n = cfg.n_steps();
    let h = cfg.dtau;
    let amp = (2.0 * eps * model.horizon()).sqrt() * h.sqrt();
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut drift = Vec::with_capacity(n);
    let mut y = x_t.to_vec();
    times.push(0.0);
    states.push(y.clone());
    for step in 0..n {
        let tau = step as f64 * h;
        let t = model.horizon() * (-tau).exp();
        let (mut next, sq) = drift_step(model, &y, t, coef, h);
        drift.push(sq);
        if eps > 0.0 {
            let sigma = amp * (-0.5 * tau).exp();
            for v in next.iter_mut() {
                let xi: f64 = rng.sample(StandardNormal);
                *v += sigma * xi;
            }
        }
        if !vecops::all_finite(&next) {
            return Err(Error::NonFiniteState { step: step + 1 });
        }
        y = next;
        times.push((step + 1) as f64 * h);
        states.push(y.clone());
    }
    Ok(Trajectory {
        times,
        states,
        drift_norm_sq: Some(drift),
        mode: TrajectoryMode::SimilaritySde,
        meta: cfg.meta(model, h, seed),
        warnings: Vec::new(),
    })
}

/// Selected velocity of the limiting inclusion at a point.
struct Selection {
    v: Vec<f64>,
    /// Reference index per measure for gap bookkeeping.
    anchor1: usize,
    anchor2: usize,
    tied1: Vec<usize>,
    tied2: Vec<usize>,
}

fn cell_velocity(model: &MixedScoreModel, z: &[f64], k: usize, m: usize) -> Vec<f64> {
    let l = model.lambda();
    let (a, b) = (model.mu1().point(k), model.mu2().point(m));
    let (act1, act2) = (model.is_active(1), model.is_active(2));
    z.iter()
        .enumerate()
        .map(|(j, zj)| {
            let c = match (act1, act2) {
                (true, false) => a[j],
                (false, true) => b[j],
                _ => l * a[j] + (1.0 - l) * b[j],
            };
            -0.5 * (zj - c)
        })
        .collect()
}

fn consistent(measure: &crate::measures::EmpiricalMeasure, v: &[f64], k: usize, tied: &[usize]) -> bool {
    let a = measure.point(k);
    tied.iter().all(|&o| o == k || vecops::dot(v, &vecops::sub(a, measure.point(o))) >= 0.0)
}

fn select(model: &MixedScoreModel, z: &[f64], tol: f64, rule: SlidingRule, step: usize) -> Result<Selection> {
    let (mu1, mu2) = (model.mu1(), model.mu2());
    let (act1, act2) = (model.is_active(1), model.is_active(2));
    let n1 = mu1.nearest_set_unchecked(z, tol);
    let n2 = mu2.nearest_set_unchecked(z, tol);
    let t1 = if act1 { n1.indices } else { vec![n1.indices[0]] };
    let t2 = if act2 { n2.indices } else { vec![n2.indices[0]] };
    let make = |v: Vec<f64>, a1: usize, a2: usize, t1: Vec<usize>, t2: Vec<usize>| Selection {
        v,
        anchor1: a1,
        anchor2: a2,
        tied1: t1,
        tied2: t2,
    };
    if (t1.len() == 1 && t2.len() == 1) || rule == SlidingRule::Chatter {
        let (k, m) = (t1[0], t2[0]);
        return Ok(make(cell_velocity(model, z, k, m), k, m, vec![k], vec![m]));
    }
    for &k in &t1 {
        for &m in &t2 {
            let v = cell_velocity(model, z, k, m);
            if consistent(mu1, &v, k, &t1) && consistent(mu2, &v, m, &t2) {
                return Ok(make(v, k, m, vec![k], vec![m]));
            }
        }
    }
    // sliding: min-norm hull element, kept on the tie set
    let gens: Vec<Vec<f64>> = t1
        .iter()
        .flat_map(|&k| t2.iter().map(move |&m| (k, m)))
        .map(|(k, m)| vecops::scale(&cell_velocity(model, z, k, m), -2.0))
        .collect();
    let w = geometry::min_norm_point(&gens).map_err(|_| Error::SlidingFailure { step })?;
    let mut normals = Vec::new();
    for (measure, tied) in [(mu1, &t1), (mu2, &t2)] {
        let a = measure.point(tied[0]);
        for &o in &tied[1..] {
            normals.push(vecops::sub(measure.point(o), a));
        }
    }
    let v = linalg::project_tangent(&normals, &vecops::scale(&w, -0.25))
        .filter(|v| vecops::all_finite(v))
        .ok_or(Error::SlidingFailure { step })?;
    Ok(make(v, t1[0], t2[0], t1, t2))
}

/// Largest `s ≤ limit` before some untied competitor overtakes the anchor.
fn first_crossing(
    measure: &crate::measures::EmpiricalMeasure,
    z: &[f64],
    v: &[f64],
    anchor: usize,
    tied: &[usize],
    limit: f64,
) -> f64 {
    let a = measure.point(anchor);
    let sa = vecops::dist_sq(z, a);
    let mut s_min = limit;
    for (k, p) in measure.points().enumerate() {
        if tied.contains(&k) {
            continue;
        }
        let rate = 2.0 * vecops::dot(v, &vecops::sub(a, p));
        if rate < 0.0 {
            let gap = (vecops::dist_sq(z, p) - sa).max(0.0);
            s_min = s_min.min(gap / -rate);
        }
    }
    s_min
}

/// One macro step of length `h`; returns the new state and `∫‖Ż‖²` over it.
fn inclusion_step(
    model: &MixedScoreModel,
    z: &[f64],
    h: f64,
    tol: f64,
    rule: SlidingRule,
    step: usize,
) -> Result<(Vec<f64>, f64)> {
    let mut z = z.to_vec();
    let mut remaining = h;
    let mut integral = 0.0;
    let mut sub = 0;
    while remaining > 0.0 {
        let sel = select(model, &z, tol, rule, step)?;
        let speed_sq = vecops::norm_sq(&sel.v);
        if speed_sq == 0.0 {
            break;
        }
        let mut s = remaining;
        if rule == SlidingRule::Project && sub < MAX_SUBSTEPS {
            if model.is_active(1) {
                s = first_crossing(model.mu1(), &z, &sel.v, sel.anchor1, &sel.tied1, s);
            }
            if model.is_active(2) {
                s = first_crossing(model.mu2(), &z, &sel.v, sel.anchor2, &sel.tied2, s);
            }
        }
        z = vecops::axpy(&z, s, &sel.v);
        integral += s * speed_sq;
        remaining -= s;
        sub += 1;
        if sub > MAX_SUBSTEPS && remaining > 0.0 {
            // Zeno guard: finish the step on the current selection
            let sel = select(model, &z, tol, rule, step)?;
            integral += remaining * vecops::norm_sq(&sel.v);
            z = vecops::axpy(&z, remaining, &sel.v);
            break;
        }
    }
    if !vecops::all_finite(&z) {
        return Err(Error::NonFiniteState { step });
    }
    Ok((z, integral))
}

/// Limiting inclusion `Ż ∈ -¼ ∂Φ_λ(Z)` by event-clipped explicit Euler.
///
/// Inside a cell the selection is the affine field `-½(z - c_{kℓ})`. On an
/// interface the first cell (lowest indices) whose field does not leave it
/// is used; if none qualifies the trajectory slides along the interface with
/// the tangential part of `-¼` times the min-norm hull element. Steps are
/// clipped at the first cell-boundary crossing.
pub fn simulate_limit_inclusion(
    model: &MixedScoreModel,
    z0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    check_start(model, z0)?;
    let n = cfg.n_steps();
    let h = cfg.dtau;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut drift = Vec::with_capacity(n);
    let mut z = z0.to_vec();
    times.push(0.0);
    states.push(z.clone());
    for step in 0..n {
        let (next, integral) = inclusion_step(model, &z, h, cfg.sliding_tol, cfg.sliding, step + 1)?;
        drift.push(integral / h);
        z = next;
        times.push((step + 1) as f64 * h);
        states.push(z.clone());
    }
    Ok(Trajectory {
        times,
        states,
        drift_norm_sq: Some(drift),
        mode: TrajectoryMode::LimitInclusion,
        meta: cfg.meta(model, h, cfg.seed),
        warnings: Vec::new(),
    })
}

const DESCENT_DTAU: f64 = 0.2;
const DESCENT_TAU_MAX: f64 = 100.0;

/// Terminal points of the limiting inclusion from each start.
pub(crate) fn descent_limits(model: &MixedScoreModel, starts: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = (DESCENT_TAU_MAX / DESCENT_DTAU) as usize;
    let mut out = Vec::with_capacity(starts.len());
    for z0 in starts {
        let mut z = z0.clone();
        for step in 0..n {
            let (next, _) =
                inclusion_step(model, &z, DESCENT_DTAU, DEFAULT_SLIDING_TOL, SlidingRule::Project, step + 1)?;
            let moved = vecops::dist(&next, &z);
            z = next;
            if moved <= 1e-11 * vecops::norm(&z).max(1.0) {
                break;
            }
        }
        out.push(z);
    }
    Ok(out)
}

/// Law of the starting points `x_T`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum InitialSampler {
    /// Independent normal coordinates with the given means and standard deviations.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Tensor grid with `n` nodes per axis; requires `n_paths = n^d`.
    Grid { bounds: SearchBox, n: usize },
    /// Explicit list; requires `n_paths = points.len()`.
    Points(Vec<Vec<f64>>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EnsembleMode {
    SimilarityOde,
    SimilaritySde,
    LimitInclusion,
    PhysicalOde,
}

/// Starting point of path `i`; Gaussian draws use stream `i` of a generator
/// seeded apart from the noise streams.
pub fn initial_state(sampler: &InitialSampler, dim: usize, seed: u64, i: usize) -> Result<Vec<f64>> {
    match sampler {
        InitialSampler::Gaussian { mean, std } => {
            check_dim(dim, mean.len())?;
            check_dim(dim, std.len())?;
            if std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return Err(Error::param("std", "must be finite and nonnegative"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INIT_SALT);
            rng.set_stream(i as u64);
            Ok(mean
                .iter()
                .zip(std)
                .map(|(m, s)| {
                    let xi: f64 = rng.sample(StandardNormal);
                    m + s * xi
                })
                .collect())
        }
        InitialSampler::Grid { bounds, n } => {
            check_dim(dim, bounds.dim())?;
            let total = n.pow(dim as u32);
            if i >= total {
                return Err(Error::param("n_paths", format!("grid has {total} nodes")));
            }
            Ok(bounds.grid(*n).swap_remove(i))
        }
        InitialSampler::Points(pts) => {
            let p = pts.get(i).ok_or_else(|| Error::param("n_paths", "exceeds number of points"))?;
            check_dim(dim, p.len())?;
            Ok(p.clone())
        }
    }
}

pub fn initial_states(sampler: &InitialSampler, dim: usize, n_paths: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n_paths == 0 {
        return Err(Error::param("n_paths", "must be at least 1"));
    }
    match sampler {
        InitialSampler::Grid { bounds, n } => {
            check_dim(dim, bounds.dim())?;
            if n.pow(dim as u32) != n_paths {
                return Err(Error::param("n_paths", "must equal the number of grid nodes"));
            }
            Ok(bounds.grid(*n))
        }
        InitialSampler::Points(pts) if pts.len() != n_paths => {
            Err(Error::param("n_paths", "must equal the number of points"))
        }
        _ => (0..n_paths).map(|i| initial_state(sampler, dim, seed, i)).collect(),
    }
}

/// Path `i` of an ensemble started at `x0`.
pub fn simulate_path(
    model: &MixedScoreModel,
    mode: EnsembleMode,
    x0: &[f64],
    cfg: &IntegratorConfig,
    i: usize,
) -> Result<Trajectory> {
    match mode {
        EnsembleMode::SimilarityOde => simulate_similarity_ode(model, x0, cfg),
        EnsembleMode::SimilaritySde => simulate_similarity_sde_path(model, x0, cfg, i as u64),
        EnsembleMode::LimitInclusion => simulate_limit_inclusion(model, x0, cfg),
        EnsembleMode::PhysicalOde => {
            cfg.validate()?;
            let t_min = model.horizon() * (-cfg.tau_max).exp();
            simulate_physical_ode(model, x0, t_min, cfg.n_steps())
        }
    }
}

/// Independent paths in index order.
pub fn ensemble(
    model: &MixedScoreModel,
    sampler: &InitialSampler,
    n_paths: usize,
    cfg: &IntegratorConfig,
    mode: EnsembleMode,
) -> Result<Vec<Trajectory>> {
    let starts = initial_states(sampler, model.dim(), n_paths, cfg.seed)?;
    starts
        .iter()
        .enumerate()
        .map(|(i, x0)| simulate_path(model, mode, x0, cfg, i))
        .collect()
}
