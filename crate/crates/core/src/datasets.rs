//! Reference configurations: two three-point sets on the line, two
//! three-point sets in the plane, and segment-supported sets sampled on a grid.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::heat::MixedScoreModel;
use crate::measures::EmpiricalMeasure;

/// Default number of sample points per unit segment length.
pub const SEGMENT_DENSITY: f64 = 200.0;

pub fn line_a1() -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(vec![vec![-1.0], vec![1.0], vec![2.0]], "A1").unwrap()
}

pub fn line_a2() -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(vec![vec![0.0], vec![1.5], vec![5.0]], "A2").unwrap()
}

pub fn plane_a1() -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(vec![vec![-3.0, 2.2], vec![-1.2, -2.6], vec![1.0, 1.3]], "A1").unwrap()
}

pub fn plane_a2() -> EmpiricalMeasure {
    EmpiricalMeasure::uniform(vec![vec![2.8, -3.2], vec![4.0, 2.6], vec![0.2, -0.2]], "A2").unwrap()
}

/// `[-1.5,-1.2] ∪ [-0.8,0.8] ∪ [1.2,1.5]`
pub const SEGMENT_PIECES: [(f64, f64); 3] = [(-1.5, -1.2), (-0.8, 0.8), (1.2, 1.5)];

/// Equispaced samples of the pieces including endpoints, `density` per unit length.
pub fn segment_samples(density: f64) -> Result<Vec<f64>> {
    if !(density > 0.0 && density.is_finite()) {
        return Err(Error::param("density", "must be finite and positive"));
    }
    let mut out = Vec::new();
    for (a, b) in SEGMENT_PIECES {
        let n = ((b - a) * density).round().max(1.0) as usize;
        out.extend((0..=n).map(|i| a + (b - a) * i as f64 / n as f64));
    }
    Ok(out)
}

/// Uniform samples of `I × {-1, 1}`.
pub fn segments_horizontal(density: f64) -> Result<EmpiricalMeasure> {
    let s = segment_samples(density)?;
    let pts = [-1.0, 1.0].iter().flat_map(|&y| s.iter().map(move |&x| vec![x, y])).collect();
    EmpiricalMeasure::uniform(pts, "A1")
}

/// Uniform samples of `{-1, 1} × I`.
pub fn segments_vertical(density: f64) -> Result<EmpiricalMeasure> {
    let s = segment_samples(density)?;
    let pts = [-1.0, 1.0].iter().flat_map(|&x| s.iter().map(move |&y| vec![x, y])).collect();
    EmpiricalMeasure::uniform(pts, "A2")
}

pub fn line_model(lambda: f64, epsilon: f64) -> Result<MixedScoreModel> {
    MixedScoreModel::new(line_a1(), line_a2(), lambda, 1.0, epsilon)
}

pub fn plane_model(lambda: f64, epsilon: f64) -> Result<MixedScoreModel> {
    MixedScoreModel::new(plane_a1(), plane_a2(), lambda, 1.0, epsilon)
}

pub fn segments_model(lambda: f64, epsilon: f64, density: f64) -> Result<MixedScoreModel> {
    MixedScoreModel::new(segments_horizontal(density)?, segments_vertical(density)?, lambda, 1.0, epsilon)
}
