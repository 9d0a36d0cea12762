//! Numerical checks of the small-time asymptotics and of the limiting dynamics.
//!
//! Every check returns a [`VerificationReport`] whose violations are measured
//! as `observed - allowed`, so a report passes exactly when its worst
//! violation is nonpositive.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{self, EnsembleMode, InitialSampler, IntegratorConfig, Trajectory, TrajectoryMode};
use crate::error::{check_dim, check_time, Error, Result};
use crate::geometry::{self, phi_unchecked};
use crate::heat::{self, MixedScoreModel};
use crate::measures::{EmpiricalMeasure, DEFAULT_TIE_TOL};
use crate::vecops;

/// How a report feeds into an overall verdict.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Gate {
    Hard,
    Informational,
    /// The check is built to fail; the gate holds when it does.
    ExpectedFailure,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointRecord {
    pub label: String,
    pub x: Vec<f64>,
    pub t: Option<f64>,
    pub observed: f64,
    pub allowed: f64,
}

impl PointRecord {
    pub fn violation(&self) -> f64 {
        self.observed - self.allowed
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VerificationReport {
    pub check_name: String,
    pub points_tested: usize,
    pub worst_violation: f64,
    pub bound_used: String,
    pub pass: bool,
    pub gate: Gate,
    pub details: Vec<PointRecord>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    /// Report over `details`, passing iff no record exceeds its allowance.
    pub fn from_records(name: &str, bound: &str, gate: Gate, details: Vec<PointRecord>) -> Self {
        let worst = details
            .iter()
            .map(PointRecord::violation)
            .fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || b > a { b } else { a });
        let worst = if details.is_empty() { 0.0 } else { worst };
        Self {
            check_name: name.to_string(),
            points_tested: details.len(),
            worst_violation: worst,
            bound_used: bound.to_string(),
            pass: worst <= 0.0,
            gate,
            details,
            notes: Vec::new(),
        }
    }

    /// Verdict after applying the gate.
    pub fn gate_passed(&self) -> bool {
        match self.gate {
            Gate::Hard => self.pass,
            Gate::Informational => true,
            Gate::ExpectedFailure => !self.pass,
        }
    }

    /// Largest observed value among records with the given label.
    pub fn max_observed(&self, label: &str) -> Option<f64> {
        self.details
            .iter()
            .filter(|r| r.label == label)
            .map(|r| r.observed)
            .reduce(f64::max)
    }

    pub fn violations(&self) -> usize {
        self.details.iter().filter(|r| !(r.violation() <= 0.0)).count()
    }
}

/// Least-squares line through `(taus, log_errors)`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateFit {
    /// Abscissae: `τ` for trajectory rates, `1/t` for gradient decay.
    pub taus: Vec<f64>,
    pub log_errors: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

impl RateFit {
    pub fn fit(taus: Vec<f64>, log_errors: Vec<f64>) -> Result<Self> {
        let n = taus.len();
        if n < 2 || n != log_errors.len() {
            return Err(Error::DegenerateFit(format!("need at least two points, got {n}")));
        }
        let nf = n as f64;
        let mx = taus.iter().sum::<f64>() / nf;
        let my = log_errors.iter().sum::<f64>() / nf;
        let sxx: f64 = taus.iter().map(|x| (x - mx) * (x - mx)).sum();
        let sxy: f64 = taus.iter().zip(&log_errors).map(|(x, y)| (x - mx) * (y - my)).sum();
        let syy: f64 = log_errors.iter().map(|y| (y - my) * (y - my)).sum();
        if !(sxx > 0.0) {
            return Err(Error::DegenerateFit("abscissae are all equal".into()));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let r2 = if syy > 0.0 { (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0) } else { 1.0 };
        Ok(Self { taus, log_errors, slope, intercept, r2 })
    }

    /// `-slope`
    pub fn decay_rate(&self) -> f64 {
        -self.slope
    }
}

/// Smallest weight over both measures.
fn min_weight(model: &MixedScoreModel) -> f64 {
    model.mu1().min_weight().min(model.mu2().min_weight())
}

/// `C₂ = max{1 + 4|log c| + 2d log 4π, 2α + 2d}(|λ| + |1-λ|)` with `α = 0`.
pub fn value_gap_c2(model: &MixedScoreModel) -> f64 {
    let d = model.dim() as f64;
    let l = model.lambda();
    let c = min_weight(model);
    let a = 1.0 + 4.0 * c.ln().abs() + 2.0 * d * (4.0 * core::f64::consts::PI).ln();
    a.max(2.0 * d) * (l.abs() + (1.0 - l).abs())
}

/// `C₁(x) = 2|λ| d₁(x) + 2|1-λ| d₂(x)`
pub fn value_gap_c1(model: &MixedScoreModel, x: &[f64]) -> f64 {
    let l = model.lambda();
    let d1 = model.mu1().distance_squared_unchecked(x).sqrt();
    let d2 = model.mu2().distance_squared_unchecked(x).sqrt();
    2.0 * l.abs() * d1 + 2.0 * (1.0 - l).abs() * d2
}

/// `|Φ_λ(x) - F_λ(x,t)| ≤ C₁(x)√t + C₂ t(1 + |log t|)` for `t ∈ (0, 1]`.
pub fn varadhan_value_gap(model: &MixedScoreModel, xs: &[Vec<f64>], ts: &[f64]) -> Result<VerificationReport> {
    for &t in ts {
        check_time(t)?;
        if t > 1.0 {
            return Err(Error::param("ts", "times must lie in (0, 1]"));
        }
    }
    let c2 = value_gap_c2(model);
    let mut details = Vec::with_capacity(xs.len() * ts.len());
    for x in xs {
        check_dim(model.dim(), x.len())?;
        let phi = phi_unchecked(model, x);
        let c1 = value_gap_c1(model, x);
        for &t in ts {
            let f = model.rescaled_potential_unchecked(x, t);
            details.push(PointRecord {
                label: "value_gap".into(),
                x: x.clone(),
                t: Some(t),
                observed: (phi - f).abs(),
                allowed: c1 * t.sqrt() + c2 * t * (1.0 + t.ln().abs()),
            });
        }
    }
    Ok(VerificationReport::from_records(
        "varadhan_value_gap",
        "C1(x)*sqrt(t) + C2*t*(1+|log t|), C1 = 2|l|d1 + 2|1-l|d2, C2 = max{1+4|log c|+2d log 4pi, 2d}(|l|+|1-l|)",
        Gate::Hard,
        details,
    ))
}

/// Squared-distance margin `min_{k≠k*} |x-x_k|² - |x-x_{k*}|²` of the nearest point.
fn margin(measure: &EmpiricalMeasure, x: &[f64]) -> (usize, f64) {
    let sq: Vec<f64> = measure.points().map(|p| vecops::dist_sq(x, p)).collect();
    let k = (0..sq.len()).min_by(|&a, &b| sq[a].total_cmp(&sq[b])).unwrap();
    let m = (0..sq.len()).filter(|&j| j != k).map(|j| sq[j] - sq[k]).fold(f64::INFINITY, f64::min);
    (k, m)
}

/// Analytic exponent `η = ¼ min(η₁, η₂)` from the squared-distance margins at `x0`.
pub fn gradient_decay_margin(model: &MixedScoreModel, x0: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x0.len())?;
    let mut eta = f64::INFINITY;
    for (i, mu) in [(1, model.mu1()), (2, model.mu2())] {
        if model.is_active(i) {
            eta = eta.min(margin(mu, x0).1);
        }
    }
    Ok(eta / 4.0)
}

/// `‖∇F_λ(x,t) - ∇Φ_λ(x)‖` without cancellation, through the barycenter offsets.
pub fn gradient_gap(model: &MixedScoreModel, x: &[f64], t: f64) -> Result<f64> {
    check_time(t)?;
    if geometry::grad_phi_smooth(model, x).is_err() {
        return Err(Error::NonsmoothPoint);
    }
    let l = model.lambda();
    let mut diff = vec![0.0; x.len()];
    for (i, mu, c) in [(1, model.mu1(), l), (2, model.mu2(), 1.0 - l)] {
        if !model.is_active(i) {
            continue;
        }
        let (k, _) = margin(mu, x);
        let off = heat::barycenter_offset(mu, x, t, k)?;
        for (dj, oj) in diff.iter_mut().zip(&off) {
            *dj -= 2.0 * c * oj;
        }
    }
    Ok(vecops::norm(&diff))
}

/// Fit of `log ‖∇F_λ(x0,t) - ∇Φ_λ(x0)‖` against `1/t`; the decay rate estimates `η`.
///
/// Errors below `1e-300` are dropped before fitting.
pub fn varadhan_gradient_decay(model: &MixedScoreModel, x0: &[f64], ts: &[f64]) -> Result<RateFit> {
    check_dim(model.dim(), x0.len())?;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(ts.len());
    for &t in ts {
        let e = gradient_gap(model, x0, t)?;
        if e >= 1e-300 {
            pts.push((1.0 / t, e.ln()));
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (taus, logs) = pts.into_iter().unzip();
    RateFit::fit(taus, logs)
}

/// Least-squares slope of `log ‖Y_τ - x*‖` over the last `tail_fraction` of the path.
///
/// Errors below `100 ε max(1, ‖x*‖)` are excluded as roundoff.
pub fn rate_fit(traj: &Trajectory, x_star: &[f64], tail_fraction: f64) -> Result<RateFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::param("tail_fraction", "must lie in (0, 1]"));
    }
    if traj.is_empty() {
        return Err(Error::Empty);
    }
    check_dim(traj.dim(), x_star.len())?;
    let terminal = vecops::dist(traj.terminal(), x_star);
    if !(terminal < 1e-1) {
        return Err(Error::param("traj", format!("not converged: terminal error {terminal:e}")));
    }
    let taus: Vec<f64> = match traj.mode {
        TrajectoryMode::PhysicalOde => {
            let h = traj.meta.horizon;
            traj.times.iter().map(|t| (h / t).ln()).collect()
        }
        _ => traj.times.clone(),
    };
    let n = traj.len();
    let keep = ((n as f64 * tail_fraction).ceil() as usize).clamp(1, n);
    let floor = 1e2 * f64::EPSILON * vecops::norm(x_star).max(1.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in (n - keep)..n {
        let e = vecops::dist(&traj.states[i], x_star);
        if e >= floor {
            xs.push(taus[i]);
            ys.push(e.ln());
        }
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateFit(String::from("all tail errors are at the roundoff floor")));
    }
    RateFit::fit(xs, ys)
}

/// `Φ_λ(Z_τ) - Φ_λ(Z_0) = -4∫₀^τ ‖Ż‖²` along a limit-inclusion path, plus monotonicity.
///
/// The integral is the step sum of the recorded time-averaged `‖Ż‖²`; the
/// identity record at sample `n` allows `Δτ ∫₀^{τ_n} ‖Ż‖²`, the exact explicit
/// Euler defect inside a cell, plus accumulated rounding.
pub fn lyapunov_audit(model: &MixedScoreModel, traj: &Trajectory) -> Result<VerificationReport> {
    if traj.mode != TrajectoryMode::LimitInclusion {
        return Err(Error::param("traj", "needs a limit_inclusion trajectory"));
    }
    let drift = traj.drift_norm_sq.as_ref().ok_or(Error::MissingDrift)?;
    if drift.len() + 1 != traj.len() {
        return Err(Error::MissingDrift);
    }
    let phis: Vec<f64> = traj.states.iter().map(|z| phi_unchecked(model, z)).collect();
    let scale = 1e-12 * (1.0 + phis[0].abs());
    let mut integral = 0.0;
    let mut details = Vec::with_capacity(2 * drift.len());
    for n in 0..drift.len() {
        let h = traj.times[n + 1] - traj.times[n];
        integral += h * drift[n];
        details.push(PointRecord {
            label: "identity".into(),
            x: traj.states[n + 1].clone(),
            t: Some(traj.times[n + 1]),
            observed: (phis[n + 1] - phis[0] + 4.0 * integral).abs(),
            allowed: h * integral * (1.0 + 1e-9) + scale * (n + 1) as f64,
        });
        details.push(PointRecord {
            label: "monotone".into(),
            x: traj.states[n + 1].clone(),
            t: Some(traj.times[n + 1]),
            observed: (phis[n + 1] - phis[n]).max(0.0),
            allowed: h * h * drift[n] + scale,
        });
    }
    Ok(VerificationReport::from_records(
        "lyapunov_audit",
        "|Phi(Z_n) - Phi(Z_0) + 4 sum h|v|^2| <= dtau * sum h|v|^2; Phi(Z_{n+1}) - Phi(Z_n) <= dtau^2 |v|^2",
        Gate::Hard,
        details,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EnergyRegime {
    Moe,
    Cfg,
}

/// Multiplicative bound on `‖ρ_ε(t)‖_p / ‖v_T‖_p`.
///
/// MoE: `(T/t)^{d(1+ε)(p-1)/(2p)}`. CFG multiplies by
/// `exp((1+ε)(p-1)(λ-1) d R² (1/t - 1/T) / (4p))` with `R` the largest norm in the second support.
pub fn energy_bound_factor(model: &MixedScoreModel, p: f64, t: f64, regime: EnergyRegime) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::param("p", "must be finite and at least 1"));
    }
    let horizon = model.horizon();
    check_time(t)?;
    if t > horizon {
        return Err(Error::param("t", "must lie in (0, T]"));
    }
    let l = model.lambda();
    match regime {
        EnergyRegime::Cfg if l <= 1.0 => return Err(Error::param("regime", "cfg needs lambda > 1")),
        EnergyRegime::Moe if l > 1.0 => return Err(Error::param("regime", "moe needs lambda <= 1")),
        _ => {}
    }
    let d = model.dim() as f64;
    let e = model.epsilon();
    let base = (horizon / t).powf(d * (1.0 + e) * (p - 1.0) / (2.0 * p));
    Ok(match regime {
        EnergyRegime::Moe => base,
        EnergyRegime::Cfg => {
            let r = model.mu2().radius();
            let k = (1.0 + e) * (p - 1.0) * (l - 1.0) * d * r * r / (4.0 * p);
            base * (k * (1.0 / t - 1.0 / horizon)).exp()
        }
    })
}

/// `‖N(0, σ²)‖_{L^p(ℝ)}`
pub fn gaussian_lp_norm(sigma: f64, p: f64) -> f64 {
    (2.0 * core::f64::consts::PI * sigma * sigma).powf((1.0 - p) / (2.0 * p)) * p.powf(-1.0 / (2.0 * p))
}

/// Histogram estimate of `‖ρ_ε(t)‖_p` from an SDE ensemble started at
/// `v_T = N(0, 2T)`, against three times the energy bound. Informational.
pub fn mc_lp_check(
    model: &MixedScoreModel,
    p: f64,
    ts: &[f64],
    n_paths: usize,
    bins: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if model.dim() != 1 {
        return Err(Error::Unsupported(format!("histogram density needs d = 1, got {}", model.dim())));
    }
    let bound = "3 * energy_bound_factor * ||v_T||_p";
    if model.epsilon() == 0.0 {
        let mut r = VerificationReport::from_records("mc_lp_check", bound, Gate::Informational, Vec::new());
        r.notes.push("epsilon = 0: no diffusion, density check skipped".into());
        return Ok(r);
    }
    if n_paths < 10_000 {
        return Err(Error::param("n_paths", "needs at least 10^4 paths"));
    }
    if bins == 0 {
        return Err(Error::param("bins", "must be positive"));
    }
    let horizon = model.horizon();
    let regime = if model.lambda() <= 1.0 { EnergyRegime::Moe } else { EnergyRegime::Cfg };
    let t_min = ts.iter().copied().fold(f64::INFINITY, f64::min);
    for &t in ts {
        check_time(t)?;
        if t > horizon {
            return Err(Error::param("ts", "times must lie in (0, T]"));
        }
    }
    let cfg = IntegratorConfig { tau_max: (horizon / t_min).ln(), seed, ..IntegratorConfig::default() };
    let sigma = (2.0 * horizon).sqrt();
    let sampler = InitialSampler::Gaussian { mean: vec![0.0], std: vec![sigma] };
    let idx: Vec<usize> = ts
        .iter()
        .map(|&t| (((horizon / t).ln() / cfg.dtau).round() as usize).min(cfg.n_steps()))
        .collect();
    let starts = dynamics::initial_states(&sampler, 1, n_paths, seed)?;
    let mut samples = vec![Vec::with_capacity(n_paths); ts.len()];
    for (i, x0) in starts.iter().enumerate() {
        let tr = dynamics::simulate_path(model, EnsembleMode::SimilaritySde, x0, &cfg, i)?;
        for (s, &k) in samples.iter_mut().zip(&idx) {
            s.push(tr.states[k][0]);
        }
    }
    let (lo1, hi1) = model.mu1().bounding_box();
    let (lo2, hi2) = model.mu2().bounding_box();
    let lo = lo1[0].min(lo2[0]) - 3.0 * sigma;
    let hi = hi1[0].max(hi2[0]) + 3.0 * sigma;
    let width = (hi - lo) / bins as f64;
    let vt_norm = gaussian_lp_norm(sigma, p);
    let mut details = Vec::with_capacity(ts.len());
    for (&t, ys) in ts.iter().zip(&samples) {
        let mut counts = vec![0usize; bins];
        for &y in ys {
            if y >= lo && y < hi {
                counts[(((y - lo) / width) as usize).min(bins - 1)] += 1;
            }
        }
        let norm_p = counts
            .iter()
            .map(|&c| (c as f64 / (n_paths as f64 * width)).powf(p) * width)
            .sum::<f64>()
            .powf(1.0 / p);
        details.push(PointRecord {
            label: "lp_norm".into(),
            x: Vec::new(),
            t: Some(t),
            observed: norm_p,
            allowed: 3.0 * energy_bound_factor(model, p, t, regime)? * vt_norm,
        });
    }
    Ok(VerificationReport::from_records("mc_lp_check", bound, Gate::Informational, details))
}

/// Step of the spatial finite differences.
pub const FD_SPACE: f64 = 1e-4;
/// Relative step of the temporal finite difference.
pub const FD_TIME_REL: f64 = 1e-6;

/// Residual of `∂_t F = F/t + ΔF - |∇F|²/(4t)` for `F = F_1`.
pub fn hj_pointwise(model: &MixedScoreModel, x: &[f64], t: f64) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    check_time(t)?;
    let f = |y: &[f64], s: f64| model.rescaled_potential_unchecked(y, s);
    let ht = FD_TIME_REL * t;
    let dt = (f(x, t + ht) - f(x, t - ht)) / (2.0 * ht);
    let f0 = f(x, t);
    let mut lap = 0.0;
    let mut y = x.to_vec();
    for j in 0..x.len() {
        y[j] = x[j] + FD_SPACE;
        let fp = f(&y, t);
        y[j] = x[j] - FD_SPACE;
        let fm = f(&y, t);
        y[j] = x[j];
        lap += (fp - 2.0 * f0 + fm) / (FD_SPACE * FD_SPACE);
    }
    let g = model.grad_rescaled_potential_unchecked(x, t);
    Ok(dt - f0 / t - lap + vecops::norm_sq(&g) / (4.0 * t))
}

/// `| |∇F|² - 4F |` at `(x, t)`; tends to zero off the interface as `t → 0`.
pub fn eikonal_defect(model: &MixedScoreModel, x: &[f64], t: f64) -> Result<f64> {
    let e = model.evaluate_all(x, t)?;
    Ok((vecops::norm_sq(&e.grad_f_lambda) - 4.0 * e.f_lambda).abs())
}

/// Viscous Hamilton–Jacobi residual at every `(x, t)`, single-measure mode.
pub fn hj_residual(model: &MixedScoreModel, xs: &[Vec<f64>], ts: &[f64], tol: f64) -> Result<VerificationReport> {
    if model.lambda() != 1.0 {
        return Err(Error::param("lambda", "the Hamilton-Jacobi check runs with lambda = 1"));
    }
    let mut details = Vec::with_capacity(xs.len() * ts.len());
    for x in xs {
        for &t in ts {
            details.push(PointRecord {
                label: "residual".into(),
                x: x.clone(),
                t: Some(t),
                observed: hj_pointwise(model, x, t)?.abs(),
                allowed: tol,
            });
        }
    }
    Ok(VerificationReport::from_records(
        "hj_residual",
        "|dF/dt - F/t - lap F + |grad F|^2/(4t)| <= tol (h_x = 1e-4, h_t = 1e-6 t)",
        Gate::Hard,
        details,
    ))
}

/// Relative step of the Hessian differences, `h = 1e-5 min(t, 1)`.
pub const FD_HESSIAN_REL: f64 = 1e-5;

/// Hessian of `F_λ(·, t)` by symmetrized central differences of `∇F_λ`.
///
/// Step `h = FD_HESSIAN_REL · min(t, 1)`.
pub fn fd_hessian(model: &MixedScoreModel, x: &[f64], t: f64) -> Result<DMatrix<f64>> {
    check_dim(model.dim(), x.len())?;
    check_time(t)?;
    let d = x.len();
    let h = FD_HESSIAN_REL * t.min(1.0);
    let mut hess = DMatrix::zeros(d, d);
    let mut y = x.to_vec();
    for j in 0..d {
        y[j] = x[j] + h;
        let gp = model.grad_rescaled_potential_unchecked(&y, t);
        y[j] = x[j] - h;
        let gm = model.grad_rescaled_potential_unchecked(&y, t);
        y[j] = x[j];
        for i in 0..d {
            hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Slack on the semiconcavity constant `2`.
pub const SEMICONCAVITY_SLACK: f64 = 1e-3;

fn semiconcavity_records(model: &MixedScoreModel, xs: &[Vec<f64>], ts: &[f64]) -> Result<Vec<PointRecord>> {
    let mut details = Vec::with_capacity(xs.len() * ts.len());
    for x in xs {
        for &t in ts {
            details.push(PointRecord {
                label: "hessian".into(),
                x: x.clone(),
                t: Some(t),
                observed: max_eigenvalue(&fd_hessian(model, x, t)?),
                allowed: 2.0 + SEMICONCAVITY_SLACK,
            });
        }
    }
    Ok(details)
}

/// `Hess F_λ ⪯ 2I` by finite differences at every `(x, t)`, and midpoint
/// concavity of `Φ_λ - |·|²` on `n_triples` random triples `(a, b, (a+b)/2)`
/// drawn from the bounding box of `xs`.
pub fn semiconcavity_check(
    model: &MixedScoreModel,
    xs: &[Vec<f64>],
    ts: &[f64],
    n_triples: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if model.lambda() > 1.0 {
        return Err(Error::param("lambda", "semiconcavity is only guaranteed for lambda in [0, 1]"));
    }
    let mut details = semiconcavity_records(model, xs, ts)?;
    if n_triples > 0 && !xs.is_empty() {
        let d = model.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for x in xs {
            for j in 0..d {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = |y: &[f64]| phi_unchecked(model, y) - vecops::norm_sq(y);
        for _ in 0..n_triples {
            let a: Vec<f64> = (0..d).map(|j| rng.random_range(lo[j]..=hi[j])).collect();
            let b: Vec<f64> = (0..d).map(|j| rng.random_range(lo[j]..=hi[j])).collect();
            let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
            let scale = 1e-12 * (1.0 + vecops::norm_sq(&a) + vecops::norm_sq(&b));
            details.push(PointRecord {
                label: "midpoint".into(),
                x: m.clone(),
                t: None,
                observed: 0.5 * (g(&a) + g(&b)) - g(&m),
                allowed: scale,
            });
        }
    }
    Ok(VerificationReport::from_records(
        "semiconcavity_check",
        "lambda_max(FD Hess F, h = 1e-5 min(t,1)) <= 2 + 1e-3; (g(a)+g(b))/2 <= g((a+b)/2) for g = Phi - |x|^2",
        Gate::Hard,
        details,
    ))
}

/// Guidance counterpart of [`semiconcavity_check`], built to fail: the Hessian
/// bound is probed at the midpoint of the closest pair of the second support,
/// where `-(λ-1) d₂²` has a convex kink.
pub fn semiconcavity_expected_failure(model: &MixedScoreModel, t: f64) -> Result<VerificationReport> {
    if model.lambda() <= 1.0 {
        return Err(Error::param("lambda", "the expected-failure fixture needs lambda > 1"));
    }
    let mu2 = model.mu2();
    if mu2.len() < 2 {
        return Err(Error::param("mu2", "needs at least two points"));
    }
    let mut best = (f64::INFINITY, 0, 1);
    for a in 0..mu2.len() {
        for b in (a + 1)..mu2.len() {
            let d = vecops::dist_sq(mu2.point(a), mu2.point(b));
            if d < best.0 {
                best = (d, a, b);
            }
        }
    }
    let mid: Vec<f64> = mu2.point(best.1).iter().zip(mu2.point(best.2)).map(|(p, q)| 0.5 * (p + q)).collect();
    let details = semiconcavity_records(model, &[mid], &[t])?;
    let mut r = VerificationReport::from_records(
        "semiconcavity_expected_failure",
        "lambda_max(FD Hess F) <= 2 + 1e-3 (expected to fail for lambda > 1)",
        Gate::ExpectedFailure,
        details,
    );
    r.notes.push(format!("probe at the midpoint of points {} and {} of the second support", best.1, best.2));
    Ok(r)
}

/// Distance from `y` to the convex hull of `points`.
pub fn distance_to_hull(points: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let shifted: Vec<Vec<f64>> = points.iter().map(|p| vecops::sub(p, y)).collect();
    Ok(vecops::norm(&geometry::min_norm_point(&shifted)?))
}

/// Points `λ x_k + (1-λ) y_ℓ` spanning `K = conv(λA₁ + (1-λ)A₂)`.
pub fn mixed_hull_generators(model: &MixedScoreModel) -> Vec<Vec<f64>> {
    let l = model.lambda();
    let mut out = Vec::with_capacity(model.mu1().len() * model.mu2().len());
    for a in model.mu1().points() {
        for b in model.mu2().points() {
            out.push(a.iter().zip(b).map(|(p, q)| l * p + (1.0 - l) * q).collect());
        }
    }
    out
}

/// `dist(Y_τ, K)² ≤ slack · e^{-τ} dist(x_T, K)² + Δτ` along a similarity path (MoE).
pub fn confinement_check(model: &MixedScoreModel, traj: &Trajectory, slack: f64) -> Result<VerificationReport> {
    if model.lambda() > 1.0 {
        return Err(Error::param("lambda", "confinement holds for lambda in [0, 1]"));
    }
    if !matches!(traj.mode, TrajectoryMode::SimilarityOde | TrajectoryMode::LimitInclusion) {
        return Err(Error::param("traj", "needs a similarity-time trajectory"));
    }
    let gens = mixed_hull_generators(model);
    let l0 = distance_to_hull(&gens, &traj.states[0])?.powi(2);
    let mut details = Vec::with_capacity(traj.len());
    for (tau, y) in traj.times.iter().zip(&traj.states) {
        details.push(PointRecord {
            label: "confinement".into(),
            x: y.clone(),
            t: Some(*tau),
            observed: distance_to_hull(&gens, y)?.powi(2),
            allowed: slack * (-tau).exp() * l0 + traj.meta.dtau,
        });
    }
    Ok(VerificationReport::from_records(
        "confinement",
        "dist(Y_tau, K)^2 <= slack * exp(-tau) * dist(x_T, K)^2 + dtau",
        Gate::Hard,
        details,
    ))
}

/// Nearest-set test used to pick off-interface probe points.
pub fn is_off_interface(model: &MixedScoreModel, x: &[f64]) -> bool {
    geometry::effective_sets(model, x, DEFAULT_TIE_TOL).2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets;

    #[test]
    fn fit_recovers_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 0.5 * x).collect();
        let f = RateFit::fit(xs, ys).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.intercept - 2.0).abs() < 1e-13);
        assert!((f.r2 - 1.0).abs() < 1e-12);
        assert!(RateFit::fit(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn report_gates() {
        let rec = |o: f64| PointRecord { label: "a".into(), x: vec![], t: None, observed: o, allowed: 1.0 };
        let ok = VerificationReport::from_records("c", "b", Gate::Hard, vec![rec(0.5), rec(1.0)]);
        assert!(ok.pass && ok.gate_passed() && ok.worst_violation == 0.0);
        let bad = VerificationReport::from_records("c", "b", Gate::ExpectedFailure, vec![rec(3.0)]);
        assert!(!bad.pass && bad.gate_passed());
        assert_eq!(bad.violations(), 1);
    }

    #[test]
    fn value_gap_at_overlap_uses_c2_only() {
        let a = EmpiricalMeasure::uniform(vec![vec![0.0], vec![3.0]], "a").unwrap();
        let b = EmpiricalMeasure::uniform(vec![vec![0.0], vec![-2.0]], "b").unwrap();
        let m = MixedScoreModel::new(a, b, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(value_gap_c1(&m, &[0.0]), 0.0);
        let r = varadhan_value_gap(&m, &[vec![0.0]], &[1e-2, 1e-3, 1e-4]).unwrap();
        assert!(r.pass);
        assert!(varadhan_value_gap(&m, &[vec![0.0]], &[2.0]).is_err());
    }

    #[test]
    fn c2_arithmetic() {
        // c = 1/3, d = 1, λ = 0.5
        let m = datasets::line_model(0.5, 0.0).unwrap();
        let expect = 1.0 + 4.0 * 3f64.ln() + 2.0 * (4.0 * core::f64::consts::PI).ln();
        assert!((value_gap_c2(&m) - expect).abs() < 1e-14);
        let g = datasets::line_model(2.0, 0.0).unwrap();
        assert!((value_gap_c2(&g) - 3.0 * expect).abs() < 1e-13);
    }

    #[test]
    fn energy_factor_examples() {
        let m = datasets::line_model(0.5, 0.0).unwrap();
        assert_eq!(energy_bound_factor(&m, 1.0, 0.01, EnergyRegime::Moe).unwrap(), 1.0);
        assert_eq!(energy_bound_factor(&m, 3.0, 1.0, EnergyRegime::Moe).unwrap(), 1.0);
        let f = energy_bound_factor(&m, 2.0, 0.25, EnergyRegime::Moe).unwrap();
        assert!((f - 2f64.sqrt()).abs() < 1e-15);
        assert!(energy_bound_factor(&m, 0.5, 0.25, EnergyRegime::Moe).is_err());
        assert!(energy_bound_factor(&m, 2.0, 0.25, EnergyRegime::Cfg).is_err());
        let g = datasets::line_model(2.0, 0.0).unwrap();
        assert_eq!(energy_bound_factor(&g, 2.0, 1.0, EnergyRegime::Cfg).unwrap(), 1.0);
        assert!(energy_bound_factor(&g, 2.0, 0.5, EnergyRegime::Moe).is_err());
    }

    #[test]
    fn gaussian_lp_norm_matches_quadrature() {
        let (s, p) = (1.3, 2.5);
        let n = 200_000;
        let (a, b) = (-15.0, 15.0);
        let h = (b - a) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let x = a + (i as f64 + 0.5) * h;
            let g = (-x * x / (2.0 * s * s)).exp() / (2.0 * core::f64::consts::PI * s * s).sqrt();
            acc += g.powf(p) * h;
        }
        assert!((acc.powf(1.0 / p) - gaussian_lp_norm(s, p)).abs() < 1e-10);
    }

    #[test]
    fn hj_dirac_is_exact() {
        let a = EmpiricalMeasure::dirac(vec![0.3], "a").unwrap();
        let m = MixedScoreModel::new(a.clone(), a, 1.0, 1.0, 0.0).unwrap();
        for &t in &[1e-2, 0.1, 1.0] {
            assert!(hj_pointwise(&m, &[1.1], t).unwrap().abs() < 1e-6);
        }
        assert!(hj_residual(&datasets::line_model(0.5, 0.0).unwrap(), &[], &[], 1e-3).is_err());
    }

    #[test]
    fn dirac_hessian_is_two() {
        let a = EmpiricalMeasure::dirac(vec![0.3, -0.2], "a").unwrap();
        let m = MixedScoreModel::new(a.clone(), a, 1.0, 1.0, 0.0).unwrap();
        let h = fd_hessian(&m, &[1.0, 0.5], 0.1).unwrap();
        assert!((h[(0, 0)] - 2.0).abs() < 1e-6 && (h[(1, 1)] - 2.0).abs() < 1e-6 && h[(0, 1)].abs() < 1e-6);
    }

    #[test]
    fn guidance_semiconcavity_fails_as_expected() {
        let g = datasets::line_model(2.0, 0.0).unwrap();
        assert!(semiconcavity_check(&g, &[vec![0.0]], &[0.1], 0, 0).is_err());
        let r = semiconcavity_expected_failure(&g, 1e-3).unwrap();
        assert!(!r.pass && r.gate_passed());
    }

    #[test]
    fn gradient_decay_rate_matches_margin() {
        let m = datasets::line_model(0.5, 0.0).unwrap();
        let x0 = [1.1];
        let eta = gradient_decay_margin(&m, &x0).unwrap();
        let ts: Vec<f64> = (0..12).map(|i| eta / (5.0 + 15.0 * i as f64)).collect();
        let fit = varadhan_gradient_decay(&m, &x0, &ts).unwrap();
        assert!(fit.r2 > 0.99);
        let ratio = fit.decay_rate() / eta;
        assert!(ratio > 0.5 && ratio < 2.0, "ratio {ratio}");
        assert!(varadhan_gradient_decay(&m, &[0.75], &ts).is_err());
    }

    #[test]
    fn hull_distance() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        assert!((distance_to_hull(&pts, &[2.0, 0.5]).unwrap() - 1.0).abs() < 1e-12);
        assert!(distance_to_hull(&pts, &[0.5, 0.5]).unwrap() < 1e-12);
    }
}
