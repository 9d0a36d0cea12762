//! Weighted finite point sets and the distance primitives built on them.
//!
//! An [`EmpiricalMeasure`] is immutable once constructed: weights are
//! normalized to sum to one and points closer than [`DUPLICATE_TOL`] are
//! merged by adding their weights.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{check_dim, Error, Result};
use crate::vecops;

/// Points within this Euclidean distance are treated as one support point.
pub const DUPLICATE_TOL: f64 = 1e-12;

/// Default absolute tolerance on squared distances when detecting ties.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure {
    dim: usize,
    coords: Vec<f64>,
    weights: Vec<f64>,
    label: String,
}

impl EmpiricalMeasure {
    /// Builds a validated measure. `weights = None` means uniform.
    pub fn new(
        points: Vec<Vec<f64>>,
        weights: Option<Vec<f64>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let dim = points.first().map(Vec::len).ok_or(Error::Empty)?;
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            check_dim(dim, p.len())?;
            coords.extend_from_slice(p);
        }
        Self::from_flat(dim, coords, weights, label)
    }

    pub fn from_flat(
        dim: usize,
        coords: Vec<f64>,
        weights: Option<Vec<f64>>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "dimension must be at least 1"));
        }
        if coords.is_empty() {
            return Err(Error::Empty);
        }
        if coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch { expected: dim, got: coords.len() % dim });
        }
        let n = coords.len() / dim;
        for k in 0..n {
            if !vecops::all_finite(&coords[k * dim..(k + 1) * dim]) {
                return Err(Error::NonFinitePoint { index: k });
            }
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != n {
                    return Err(Error::param(
                        "weights",
                        alloc::format!("{} weights for {} points", w.len(), n),
                    ));
                }
                for (index, &value) in w.iter().enumerate() {
                    if !(value > 0.0 && value.is_finite()) {
                        return Err(Error::InvalidWeight { index, value });
                    }
                }
                w
            }
            None => alloc::vec![1.0; n],
        };

        let (coords, mut weights) = merge_duplicates(dim, coords, weights);
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { dim, coords, weights, label: label.into() })
    }

    pub fn uniform(points: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        Self::new(points, None, label)
    }

    pub fn dirac(point: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        Self::new(alloc::vec![point], None, label)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn point(&self, k: usize) -> &[f64] {
        &self.coords[k * self.dim..(k + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, k: usize) -> f64 {
        self.weights[k]
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest Euclidean norm of a support point.
    pub fn radius(&self) -> f64 {
        self.points().map(vecops::norm).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        let mut best = 0.0f64;
        for (i, a) in self.points().enumerate() {
            for b in self.points().skip(i + 1) {
                best = best.max(vecops::dist_sq(a, b));
            }
        }
        best.sqrt()
    }

    /// Componentwise `(min, max)` of the support.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = alloc::vec![f64::INFINITY; self.dim];
        let mut hi = alloc::vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for j in 0..self.dim {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        (lo, hi)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = alloc::vec![0.0; self.dim];
        for (p, w) in self.points().zip(&self.weights) {
            for j in 0..self.dim {
                m[j] += w * p[j];
            }
        }
        m
    }

    /// Squared distance from `x` to the support.
    pub fn distance_squared(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        Ok(self.distance_squared_unchecked(x))
    }

    pub(crate) fn distance_squared_unchecked(&self, x: &[f64]) -> f64 {
        self.points().map(|p| vecops::dist_sq(x, p)).fold(f64::INFINITY, f64::min)
    }

    /// All support indices within `tie_tol` (on squared distances) of the minimum.
    pub fn nearest_set(&self, x: &[f64], tie_tol: f64) -> Result<NearestSet> {
        check_dim(self.dim, x.len())?;
        if !(tie_tol >= 0.0) {
            return Err(Error::param("tie_tol", "must be nonnegative"));
        }
        Ok(self.nearest_set_unchecked(x, tie_tol))
    }

    pub(crate) fn nearest_set_unchecked(&self, x: &[f64], tie_tol: f64) -> NearestSet {
        let sq: Vec<f64> = self.points().map(|p| vecops::dist_sq(x, p)).collect();
        let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
        let indices: Vec<usize> =
            sq.iter().enumerate().filter(|(_, &s)| s <= min + tie_tol).map(|(k, _)| k).collect();
        NearestSet { is_unique: indices.len() == 1, indices, distance: min.sqrt() }
    }
}

/// Indices of the support points attaining the distance from a query point.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NearestSet {
    pub indices: Vec<usize>,
    pub distance: f64,
    pub is_unique: bool,
}

impl NearestSet {
    pub fn first(&self) -> usize {
        self.indices[0]
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }
}

fn merge_duplicates(dim: usize, coords: Vec<f64>, weights: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = weights.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| coords[a * dim].total_cmp(&coords[b * dim]));

    // representative[k] = first-occurring index of k's duplicate class
    let mut representative: Vec<usize> = (0..n).collect();
    for (pos, &a) in order.iter().enumerate() {
        let pa = &coords[a * dim..(a + 1) * dim];
        for &b in &order[pos + 1..] {
            if coords[b * dim] - pa[0] > DUPLICATE_TOL {
                break;
            }
            if vecops::dist(pa, &coords[b * dim..(b + 1) * dim]) <= DUPLICATE_TOL {
                let (ra, rb) = (find(&mut representative, a), find(&mut representative, b));
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                representative[hi] = lo;
            }
        }
    }

    let mut out_coords = Vec::with_capacity(coords.len());
    let mut out_weights: Vec<f64> = Vec::with_capacity(n);
    let mut slot = alloc::vec![usize::MAX; n];
    for k in 0..n {
        let r = find(&mut representative, k);
        if slot[r] == usize::MAX {
            slot[r] = out_weights.len();
            out_coords.extend_from_slice(&coords[r * dim..(r + 1) * dim]);
            out_weights.push(0.0);
        }
        out_weights[slot[r]] += weights[k];
    }
    (out_coords, out_weights)
}

fn find(parent: &mut [usize], mut k: usize) -> usize {
    while parent[k] != k {
        parent[k] = parent[parent[k]];
        k = parent[k];
    }
    k
}
