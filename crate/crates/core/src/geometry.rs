//! The limiting landscape `Φ_λ = λ d₁² + (1-λ) d₂²`: interfaces, Clarke and
//! outer-Clarke subdifferentials, Voronoi strata and critical points.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use core::cmp::Ordering;
use core::f64::consts::PI;

use crate::error::{check_dim, Error, Result};
use crate::heat::MixedScoreModel;
use crate::linalg;
use crate::measures::{EmpiricalMeasure, NearestSet, DEFAULT_TIE_TOL};
use crate::vecops;

/// Probe radius used to separate interface minimizers from saddles.
pub const PROBE_RADIUS: f64 = 1e-3;
/// Records closer than this are merged.
pub const DEDUP_RADIUS: f64 = 1e-6;
/// Largest admissible min-norm residual for a certified critical point.
pub const CRITICAL_TOL: f64 = 1e-8;
/// Accuracy of the min-norm solver, relative to the largest generator norm.
pub const MIN_NORM_TOL: f64 = 1e-10;
/// Iteration cap of the min-norm solver.
pub const MIN_NORM_MAX_ITER: usize = 100_000;

/// `Φ_λ(x)`
pub fn phi(model: &MixedScoreModel, x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    Ok(phi_unchecked(model, x))
}

pub(crate) fn phi_unchecked(model: &MixedScoreModel, x: &[f64]) -> f64 {
    let l = model.lambda();
    let mut v = 0.0;
    if model.is_active(1) {
        v += l * model.mu1().distance_squared_unchecked(x);
    }
    if model.is_active(2) {
        v += (1.0 - l) * model.mu2().distance_squared_unchecked(x);
    }
    v
}

/// Membership of a point in the two nondifferentiability sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NdIndicator {
    pub in_nd1: bool,
    pub in_nd2: bool,
}

impl NdIndicator {
    /// Membership in the combined interface `ND(A₁, A₂)`.
    pub fn in_nd(&self) -> bool {
        self.in_nd1 || self.in_nd2
    }
}

pub fn nd_indicator(model: &MixedScoreModel, x: &[f64], tie_tol: f64) -> Result<NdIndicator> {
    let n1 = model.mu1().nearest_set(x, tie_tol)?;
    let n2 = model.mu2().nearest_set(x, tie_tol)?;
    Ok(NdIndicator { in_nd1: !n1.is_unique, in_nd2: !n2.is_unique })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SubgradientKind {
    Clarke,
    OuterClarke,
}

/// `conv(generators)`
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SubgradientSet {
    pub generators: Vec<Vec<f64>>,
    pub kind: SubgradientKind,
}

impl SubgradientSet {
    pub fn min_norm(&self) -> Result<Vec<f64>> {
        min_norm_element(self)
    }

    pub fn contains_zero(&self, tol: f64) -> Result<bool> {
        Ok(vecops::norm(&self.min_norm()?) <= tol)
    }
}

fn pair_generator(model: &MixedScoreModel, x: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let l = model.lambda();
    if l == 1.0 {
        return x.iter().zip(a).map(|(xi, ai)| 2.0 * (xi - ai)).collect();
    }
    if l == 0.0 {
        return x.iter().zip(b).map(|(xi, bi)| 2.0 * (xi - bi)).collect();
    }
    let m = 1.0 - l;
    x.iter()
        .zip(a.iter().zip(b))
        .map(|(xi, (ai, bi))| 2.0 * l * (xi - ai) + 2.0 * m * (xi - bi))
        .collect()
}

fn sort_dedup(mut gens: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    gens.sort_by(|a, b| lex_cmp(a, b));
    gens.dedup_by(|a, b| a == b);
    gens
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

fn outer_from_sets(
    model: &MixedScoreModel,
    x: &[f64],
    i: &[usize],
    j: &[usize],
) -> SubgradientSet {
    let mut gens = Vec::with_capacity(i.len() * j.len());
    for &k in i {
        for &l in j {
            gens.push(pair_generator(model, x, model.mu1().point(k), model.mu2().point(l)));
        }
    }
    SubgradientSet { generators: sort_dedup(gens), kind: SubgradientKind::OuterClarke }
}

/// Outer Clarke hull `conv{2λ(x-x_k) + 2(1-λ)(x-y_ℓ) : k ∈ Π₁(x), ℓ ∈ Π₂(x)}`.
pub fn outer_clarke_subdifferential(
    model: &MixedScoreModel,
    x: &[f64],
    tie_tol: f64,
) -> Result<SubgradientSet> {
    let n1 = model.mu1().nearest_set(x, tie_tol)?;
    let n2 = model.mu2().nearest_set(x, tie_tol)?;
    Ok(outer_from_sets(model, x, &n1.indices, &n2.indices))
}

/// Clarke subdifferential of `Φ_λ` at the default tie tolerance.
pub fn clarke_subdifferential(model: &MixedScoreModel, x: &[f64]) -> Result<SubgradientSet> {
    clarke_subdifferential_tol(model, x, DEFAULT_TIE_TOL)
}

/// Clarke subdifferential of `Φ_λ`.
///
/// For `λ ∈ [0,1]`, `Φ_λ = min_{k,ℓ} Q_{kℓ}` with smooth quadratics
/// `Q_{kℓ} = λ|x-x_k|² + (1-λ)|x-y_ℓ|²`, so the set is the hull of the gradients
/// of the active pieces. For `λ > 1` one of the two terms is smooth away from
/// the simultaneous interface and the hull has the outer form; on that
/// interface only the outer hull is available.
pub fn clarke_subdifferential_tol(
    model: &MixedScoreModel,
    x: &[f64],
    tie_tol: f64,
) -> Result<SubgradientSet> {
    check_dim(model.dim(), x.len())?;
    if !(tie_tol >= 0.0) {
        return Err(Error::param("tie_tol", "must be nonnegative"));
    }
    let l = model.lambda();
    if l > 1.0 {
        let nd = nd_indicator(model, x, tie_tol)?;
        if nd.in_nd1 && nd.in_nd2 {
            return Err(Error::OnlyOuterHullAvailable);
        }
        let mut set = outer_clarke_subdifferential(model, x, tie_tol)?;
        set.kind = SubgradientKind::Clarke;
        return Ok(set);
    }
    let (mu1, mu2) = (model.mu1(), model.mu2());
    let sq1: Vec<f64> = mu1.points().map(|p| vecops::dist_sq(x, p)).collect();
    let sq2: Vec<f64> = mu2.points().map(|p| vecops::dist_sq(x, p)).collect();
    let q = |k: usize, m: usize| l * sq1[k] + (1.0 - l) * sq2[m];
    let mut best = f64::INFINITY;
    for k in 0..sq1.len() {
        for m in 0..sq2.len() {
            best = best.min(q(k, m));
        }
    }
    let mut gens = Vec::new();
    for k in 0..sq1.len() {
        for m in 0..sq2.len() {
            if q(k, m) <= best + tie_tol {
                gens.push(pair_generator(model, x, mu1.point(k), mu2.point(m)));
            }
        }
    }
    Ok(SubgradientSet { generators: sort_dedup(gens), kind: SubgradientKind::Clarke })
}

/// Minimum-norm point of `conv(generators)`.
pub fn min_norm_element(set: &SubgradientSet) -> Result<Vec<f64>> {
    min_norm_point(&set.generators)
}

pub(crate) fn min_norm_point(gens: &[Vec<f64>]) -> Result<Vec<f64>> {
    match gens.len() {
        0 => Err(Error::Empty),
        1 => Ok(gens[0].clone()),
        2 => Ok(segment_min(&gens[0], &gens[1])),
        3 => Ok(triangle_min(&gens[0], &gens[1], &gens[2])),
        _ => wolfe(gens),
    }
}

fn segment_min(a: &[f64], b: &[f64]) -> Vec<f64> {
    let ab = vecops::sub(b, a);
    let den = vecops::norm_sq(&ab);
    if den == 0.0 {
        return a.to_vec();
    }
    let s = (-vecops::dot(a, &ab) / den).clamp(0.0, 1.0);
    vecops::axpy(a, s, &ab)
}

fn triangle_min(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let u = vecops::sub(b, a);
    let v = vecops::sub(c, a);
    let (uu, uv, vv) = (vecops::dot(&u, &u), vecops::dot(&u, &v), vecops::dot(&v, &v));
    let (au, av) = (vecops::dot(a, &u), vecops::dot(a, &v));
    let det = uu * vv - uv * uv;
    if det > 1e-14 * uu.max(vv) * uu.max(vv) {
        // stationarity of |a + s u + r v|² in (s, r)
        let s = (-au * vv + av * uv) / det;
        let r = (-av * uu + au * uv) / det;
        if s >= 0.0 && r >= 0.0 && s + r <= 1.0 {
            let p = vecops::axpy(a, s, &u);
            return vecops::axpy(&p, r, &v);
        }
    }
    let cands = [segment_min(a, b), segment_min(b, c), segment_min(a, c)];
    cands
        .into_iter()
        .min_by(|p, q| vecops::norm_sq(p).total_cmp(&vecops::norm_sq(q)))
        .unwrap()
}

/// Wolfe's minimum-norm-point algorithm.
fn wolfe(gens: &[Vec<f64>]) -> Result<Vec<f64>> {
    let scale = gens.iter().map(|g| vecops::norm_sq(g)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(vec![0.0; gens[0].len()]);
    }
    let eps = MIN_NORM_TOL * MIN_NORM_TOL * scale;
    let start = (0..gens.len())
        .min_by(|&i, &j| vecops::norm_sq(&gens[i]).total_cmp(&vecops::norm_sq(&gens[j])))
        .unwrap();
    let mut corral: Vec<usize> = vec![start];
    let mut w: Vec<f64> = vec![1.0];
    let mut x = gens[start].clone();
    let mut iters = 0usize;
    loop {
        iters += 1;
        if iters > MIN_NORM_MAX_ITER {
            return Err(Error::NoConvergence { iterations: MIN_NORM_MAX_ITER });
        }
        let xx = vecops::norm_sq(&x);
        let (j, xpj) = (0..gens.len())
            .map(|j| (j, vecops::dot(&x, &gens[j])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - xpj <= eps || corral.contains(&j) {
            return Ok(x);
        }
        let prev_x = x.clone();
        corral.push(j);
        w.push(0.0);
        loop {
            iters += 1;
            if iters > MIN_NORM_MAX_ITER {
                return Err(Error::NoConvergence { iterations: MIN_NORM_MAX_ITER });
            }
            let alpha = affine_min_weights(gens, &corral)
                .ok_or(Error::NoConvergence { iterations: iters })?;
            if alpha.iter().all(|&a| a > 1e-14) {
                w = alpha;
                x = combine(gens, &corral, &w);
                break;
            }
            let mut theta = 1.0f64;
            for (wi, ai) in w.iter().zip(&alpha) {
                if *ai <= 1e-14 && wi - ai > 0.0 {
                    theta = theta.min(wi / (wi - ai));
                }
            }
            for (wi, ai) in w.iter_mut().zip(&alpha) {
                *wi = theta * ai + (1.0 - theta) * *wi;
            }
            let mut kept_c = Vec::with_capacity(corral.len());
            let mut kept_w = Vec::with_capacity(corral.len());
            let mut dropped = false;
            for (&c, &wi) in corral.iter().zip(&w) {
                if wi <= 1e-14 && !dropped {
                    dropped = true;
                    continue;
                }
                kept_c.push(c);
                kept_w.push(wi.max(0.0));
            }
            let total: f64 = kept_w.iter().sum();
            kept_w.iter_mut().for_each(|v| *v /= total);
            corral = kept_c;
            w = kept_w;
            x = combine(gens, &corral, &w);
            if corral.len() == 1 {
                break;
            }
        }
        // rounding can make a gap look positive without any true descent
        if vecops::norm_sq(&x) >= xx {
            return Ok(prev_x);
        }
    }
}

fn combine(gens: &[Vec<f64>], idx: &[usize], w: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; gens[0].len()];
    for (&i, &wi) in idx.iter().zip(w) {
        for (xj, gj) in x.iter_mut().zip(&gens[i]) {
            *xj += wi * gj;
        }
    }
    x
}

/// Affine weights (summing to one) of the point of `aff(gens[idx])` closest to the origin.
fn affine_min_weights(gens: &[Vec<f64>], idx: &[usize]) -> Option<Vec<f64>> {
    let p0 = &gens[idx[0]];
    if idx.len() == 1 {
        return Some(vec![1.0]);
    }
    let cols: Vec<Vec<f64>> = idx[1..].iter().map(|&i| vecops::sub(&gens[i], p0)).collect();
    let rhs: Vec<f64> = p0.iter().map(|v| -v).collect();
    let beta = linalg::lstsq_columns(&cols, &rhs)?;
    let mut w = Vec::with_capacity(idx.len());
    w.push(1.0 - beta.iter().sum::<f64>());
    w.extend(beta);
    Some(w)
}

/// Nearest sets of the coefficient-carrying measures. A measure with zero
/// coefficient reports its true nearest set but never counts as tied.
pub(crate) fn effective_sets(
    model: &MixedScoreModel,
    x: &[f64],
    tie_tol: f64,
) -> (NearestSet, NearestSet, bool) {
    let n1 = model.mu1().nearest_set_unchecked(x, tie_tol);
    let n2 = model.mu2().nearest_set_unchecked(x, tie_tol);
    let smooth = (!model.is_active(1) || n1.is_unique) && (!model.is_active(2) || n2.is_unique);
    (n1, n2, smooth)
}

/// `∇Φ_λ(x) = 2(x - λ a₁ - (1-λ) a₂)` away from the interface.
pub fn grad_phi_smooth(model: &MixedScoreModel, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(model.dim(), x.len())?;
    let (n1, n2, smooth) = effective_sets(model, x, DEFAULT_TIE_TOL);
    if !smooth {
        return Err(Error::NonsmoothPoint);
    }
    Ok(pair_generator(model, x, model.mu1().point(n1.first()), model.mu2().point(n2.first())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Classification {
    SmoothLocalMin,
    InterfacePoint,
    SaddleCandidate,
}

impl Classification {
    pub fn is_local_min(self) -> bool {
        !matches!(self, Classification::SaddleCandidate)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::SmoothLocalMin => "smooth_local_min",
            Classification::InterfacePoint => "interface_point",
            Classification::SaddleCandidate => "saddle_candidate",
        }
    }
}

/// Index sets `(I, J)` naming the stratum `Σ_{I,J}`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StratumKey {
    #[cfg_attr(feature = "serde", serde(rename = "I"))]
    pub i: Vec<usize>,
    #[cfg_attr(feature = "serde", serde(rename = "J"))]
    pub j: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalPointRecord {
    pub x_star: Vec<f64>,
    pub active1: Vec<usize>,
    pub active2: Vec<usize>,
    pub classification: Classification,
    pub phi_value: f64,
    pub residual: f64,
}

impl CriticalPointRecord {
    pub fn key(&self) -> StratumKey {
        StratumKey { i: self.active1.clone(), j: self.active2.clone() }
    }
}

/// Axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SearchBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl SearchBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::param("search_box", "need finite lo < hi on every axis"));
        }
        Ok(Self { lo, hi })
    }

    /// Bounding box of both supports, widened by `margin` times its largest side.
    pub fn around(model: &MixedScoreModel, margin: f64) -> Self {
        let (mut lo, mut hi) = model.mu1().bounding_box();
        let (lo2, hi2) = model.mu2().bounding_box();
        for j in 0..lo.len() {
            lo[j] = lo[j].min(lo2[j]);
            hi[j] = hi[j].max(hi2[j]);
        }
        // guidance pushes minimizers outside the data hull
        let l = model.lambda();
        if l > 1.0 {
            for p in model.mu1().points() {
                for q in model.mu2().points() {
                    for j in 0..lo.len() {
                        let c = l * p[j] + (1.0 - l) * q[j];
                        lo[j] = lo[j].min(c);
                        hi[j] = hi[j].max(c);
                    }
                }
            }
        }
        let side = lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max).max(1.0);
        for j in 0..lo.len() {
            lo[j] -= margin * side;
            hi[j] += margin * side;
        }
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// The `n^d` tensor grid, first axis varying fastest.
    pub fn grid(&self, n: usize) -> Vec<Vec<f64>> {
        let d = self.dim();
        let total = n.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        for flat in 0..total {
            let mut rem = flat;
            let mut p = Vec::with_capacity(d);
            for j in 0..d {
                let i = rem % n;
                rem /= n;
                let s = if n == 1 { 0.5 } else { i as f64 / (n - 1) as f64 };
                p.push(self.lo[j] + s * (self.hi[j] - self.lo[j]));
            }
            out.push(p);
        }
        out
    }

    pub fn spacing(&self, n: usize) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) / (n.max(2) - 1) as f64)
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnumerationConfig {
    /// Largest `|I|` and `|J|` considered.
    pub max_active: usize,
    /// Defaults to [`SearchBox::around`] with margin 0.25.
    pub search_box: Option<SearchBox>,
    pub grid_n: usize,
    /// Run the multi-start limiting-inclusion pass when `λ > 1`.
    pub descent: bool,
    pub tie_tol: f64,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self { max_active: 3, search_box: None, grid_n: 41, descent: true, tie_tol: DEFAULT_TIE_TOL }
    }
}

/// Output of [`enumerate_critical_points`].
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalPointSet {
    /// Ordered by `(phi_value, x_star)`.
    pub records: Vec<CriticalPointRecord>,
    /// Strata whose tie system turned out inconsistent.
    pub skipped_strata: Vec<StratumKey>,
    pub warnings: Vec<String>,
}

impl CriticalPointSet {
    pub fn local_minimizers(&self) -> impl Iterator<Item = &CriticalPointRecord> {
        self.records.iter().filter(|r| r.classification.is_local_min())
    }
}

enum StratumOutcome {
    Critical(CriticalPointRecord),
    Rejected,
    Inconsistent,
}

/// Tie rows `2x·(b - a) = |b|² - |a|²` for every member of `idx` against the first.
fn tie_rows(measure: &EmpiricalMeasure, idx: &[usize], rows: &mut Vec<Vec<f64>>, rhs: &mut Vec<f64>) {
    let a = measure.point(idx[0]);
    for &k in &idx[1..] {
        let b = measure.point(k);
        rows.push(a.iter().zip(b).map(|(ai, bi)| 2.0 * (bi - ai)).collect());
        rhs.push(vecops::norm_sq(b) - vecops::norm_sq(a));
    }
}

fn solve_stratum(model: &MixedScoreModel, i: &[usize], j: &[usize], tie_tol: f64) -> StratumOutcome {
    let (mu1, mu2) = (model.mu1(), model.mu2());
    let (act1, act2) = (model.is_active(1), model.is_active(2));
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    if act1 {
        tie_rows(mu1, i, &mut rows, &mut rhs);
    }
    if act2 {
        tie_rows(mu2, j, &mut rows, &mut rhs);
    }
    let l = model.lambda();
    let c: Vec<f64> = match (act1, act2) {
        (true, false) => mu1.point(i[0]).to_vec(),
        (false, true) => mu2.point(j[0]).to_vec(),
        _ => mu1
            .point(i[0])
            .iter()
            .zip(mu2.point(j[0]))
            .map(|(a, b)| l * a + (1.0 - l) * b)
            .collect(),
    };
    let Some((x, res)) = linalg::project_onto_affine(&rows, &rhs, &c) else {
        return StratumOutcome::Inconsistent;
    };
    let scale = 1.0 + rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(res <= 1e-8 * scale) || !vecops::all_finite(&x) {
        return StratumOutcome::Inconsistent;
    }
    let (n1, n2, _) = effective_sets(model, &x, tie_tol);
    if (act1 && n1.indices != i) || (act2 && n2.indices != j) {
        return StratumOutcome::Rejected;
    }
    match certify(model, x, tie_tol) {
        Some(r) => StratumOutcome::Critical(r),
        None => StratumOutcome::Rejected,
    }
}

/// Builds a record at `x` if `0` lies in the outer hull there.
fn certify(model: &MixedScoreModel, x: Vec<f64>, tie_tol: f64) -> Option<CriticalPointRecord> {
    let (n1, n2, smooth) = effective_sets(model, &x, tie_tol);
    let hull = outer_from_sets(model, &x, &n1.indices, &n2.indices);
    let residual = vecops::norm(&min_norm_element(&hull).ok()?);
    if !(residual <= CRITICAL_TOL) {
        return None;
    }
    let phi_value = phi_unchecked(model, &x);
    let classification = if smooth {
        Classification::SmoothLocalMin
    } else if has_lower_neighbor(model, &x, phi_value) {
        Classification::SaddleCandidate
    } else {
        Classification::InterfacePoint
    };
    Some(CriticalPointRecord {
        x_star: x,
        active1: n1.indices,
        active2: n2.indices,
        classification,
        phi_value,
        residual,
    })
}

/// Unit directions for the saddle probe.
pub(crate) fn probe_directions(d: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..64)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 64.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let n = 256;
            let golden = PI * (3.0 - 5.0f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    vec![r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut out = Vec::new();
            for a in 0..d {
                for s in [1.0, -1.0] {
                    let mut e = vec![0.0; d];
                    e[a] = s;
                    out.push(e);
                }
                for b in (a + 1)..d {
                    for (sa, sb) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                        let mut e = vec![0.0; d];
                        e[a] = sa * core::f64::consts::FRAC_1_SQRT_2;
                        e[b] = sb * core::f64::consts::FRAC_1_SQRT_2;
                        out.push(e);
                    }
                }
            }
            out
        }
    }
}

fn has_lower_neighbor(model: &MixedScoreModel, x: &[f64], value: f64) -> bool {
    probe_directions(x.len()).iter().any(|u| {
        let y = vecops::axpy(x, PROBE_RADIUS, u);
        phi_unchecked(model, &y) < value - 1e-12
    })
}

/// Whether point `k` is within `tie_tol` of the nearest, stopping at the first closer point.
fn is_nearest(measure: &EmpiricalMeasure, x: &[f64], k: usize, tie_tol: f64) -> bool {
    let bound = vecops::dist_sq(x, measure.point(k)) - tie_tol;
    measure.points().all(|p| vecops::dist_sq(x, p) >= bound)
}

/// Indices whose squared distance is within `slack` of the minimum, nearest first.
fn near_set(measure: &EmpiricalMeasure, x: &[f64], slack: f64, cap: usize) -> Vec<usize> {
    let sq: Vec<f64> = measure.points().map(|p| vecops::dist_sq(x, p)).collect();
    let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
    let mut idx: Vec<usize> = (0..sq.len()).filter(|&k| sq[k] <= min + slack).collect();
    idx.sort_by(|&a, &b| sq[a].total_cmp(&sq[b]).then(a.cmp(&b)));
    idx.truncate(cap);
    idx.sort_unstable();
    idx
}

fn subsets_up_to(set: &[usize], max: usize, out: &mut BTreeSet<Vec<usize>>) {
    let n = set.len();
    for mask in 1u32..(1u32 << n) {
        if (mask.count_ones() as usize) <= max {
            out.insert((0..n).filter(|b| mask >> b & 1 == 1).map(|b| set[b]).collect());
        }
    }
}

/// Largest near set kept per grid node.
const NEAR_CAP: usize = 6;

/// Enumerates certified critical points of `Φ_λ`.
///
/// Three sources feed one deduplicated list: every smooth candidate
/// `λx_k + (1-λ)y_ℓ`, every stratum `(I, J)` with `|I|, |J| ≤ max_active`
/// detected by probing a grid over the search box, and, for `λ > 1`, the
/// limits of the limiting inclusion started from that grid. Each candidate is solved on
/// its stratum's affine hull and kept only if the outer hull contains `0`.
pub fn enumerate_critical_points(
    model: &MixedScoreModel,
    cfg: &EnumerationConfig,
) -> Result<CriticalPointSet> {
    if cfg.max_active == 0 {
        return Err(Error::param("max_active", "must be at least 1"));
    }
    if cfg.grid_n < 2 {
        return Err(Error::param("grid_n", "must be at least 2"));
    }
    if !(cfg.tie_tol >= 0.0) {
        return Err(Error::param("tie_tol", "must be nonnegative"));
    }
    let d = model.dim();
    let bx = match &cfg.search_box {
        Some(b) => {
            check_dim(d, b.dim())?;
            b.clone()
        }
        None => SearchBox::around(model, 0.25),
    };
    let (mu1, mu2) = (model.mu1(), model.mu2());
    let (act1, act2) = (model.is_active(1), model.is_active(2));
    let mut out = CriticalPointSet::default();
    let mut found: Vec<CriticalPointRecord> = Vec::new();
    let push = |found: &mut Vec<CriticalPointRecord>, r: CriticalPointRecord| {
        if !found.iter().any(|f| vecops::dist(&f.x_star, &r.x_star) <= DEDUP_RADIUS) {
            found.push(r);
        }
    };

    // smooth candidates
    let l = model.lambda();
    let ks: Vec<usize> = if act1 { (0..mu1.len()).collect() } else { vec![0] };
    let ls: Vec<usize> = if act2 { (0..mu2.len()).collect() } else { vec![0] };
    for &k in &ks {
        for &m in &ls {
            let x: Vec<f64> = match (act1, act2) {
                (true, false) => mu1.point(k).to_vec(),
                (false, true) => mu2.point(m).to_vec(),
                _ => mu1.point(k).iter().zip(mu2.point(m)).map(|(a, b)| l * a + (1.0 - l) * b).collect(),
            };
            if (act1 && !is_nearest(mu1, &x, k, cfg.tie_tol)) || (act2 && !is_nearest(mu2, &x, m, cfg.tie_tol)) {
                continue;
            }
            if let Some(r) = certify(model, x, cfg.tie_tol) {
                push(&mut found, r);
            }
        }
    }

    let mut keys: BTreeSet<(Vec<usize>, Vec<usize>)> = BTreeSet::new();
    let grid_ok = d <= 3;
    if !grid_ok {
        out.warnings.push(format!(
            "grid probing and descent need dimension <= 3 (got {d}); only smooth candidates were searched"
        ));
    } else {
        let grid = bx.grid(cfg.grid_n);
        let h = bx.spacing(cfg.grid_n);
        let reach = h * (d as f64).sqrt() * (1.0 + 1e-9);
        let slack1 = mu1.diameter() * reach + cfg.tie_tol;
        let slack2 = mu2.diameter() * reach + cfg.tie_tol;
        let mut near_pairs: BTreeSet<(Vec<usize>, Vec<usize>)> = BTreeSet::new();
        for g in &grid {
            let a = if act1 { near_set(mu1, g, slack1, NEAR_CAP) } else { Vec::new() };
            let b = if act2 { near_set(mu2, g, slack2, NEAR_CAP) } else { Vec::new() };
            near_pairs.insert((a, b));
        }
        for (a, b) in &near_pairs {
            let mut s1 = BTreeSet::new();
            let mut s2 = BTreeSet::new();
            if act1 {
                subsets_up_to(a, cfg.max_active, &mut s1);
            } else {
                s1.insert(vec![0]);
            }
            if act2 {
                subsets_up_to(b, cfg.max_active, &mut s2);
            } else {
                s2.insert(vec![0]);
            }
            for i in &s1 {
                for j in &s2 {
                    if i.len() > 1 || j.len() > 1 {
                        keys.insert((i.clone(), j.clone()));
                    }
                }
            }
        }

        // for λ ∈ [0, 1] every local minimizer is a smooth candidate
        if cfg.descent && l > 1.0 {
            let limits = crate::dynamics::descent_limits(model, &grid)?;
            let mut centers: Vec<Vec<f64>> = Vec::new();
            for z in limits {
                if !centers.iter().any(|c| vecops::dist(c, &z) <= DEDUP_RADIUS) {
                    centers.push(z);
                }
            }
            for c in &centers {
                let i = if act1 { mu1.nearest_set_unchecked(c, 1e-6).indices } else { vec![0] };
                let j = if act2 { mu2.nearest_set_unchecked(c, 1e-6).indices } else { vec![0] };
                if i.len() <= cfg.max_active && j.len() <= cfg.max_active {
                    keys.insert((i, j));
                }
            }
        }
    }

    let mut seen: Vec<(StratumKey, Vec<f64>)> = Vec::new();
    for (i, j) in &keys {
        match solve_stratum(model, i, j, cfg.tie_tol) {
            StratumOutcome::Critical(r) => {
                let key = r.key();
                debug_assert!(seen
                    .iter()
                    .all(|(k, x)| *k != key || vecops::dist(x, &r.x_star) <= DEDUP_RADIUS));
                seen.push((key, r.x_star.clone()));
                push(&mut found, r);
            }
            StratumOutcome::Rejected => {}
            StratumOutcome::Inconsistent => {
                out.skipped_strata.push(StratumKey { i: i.clone(), j: j.clone() })
            }
        }
    }

    found.sort_by(|a, b| {
        a.phi_value.total_cmp(&b.phi_value).then_with(|| lex_cmp(&a.x_star, &b.x_star))
    });
    out.records = found;
    Ok(out)
}
