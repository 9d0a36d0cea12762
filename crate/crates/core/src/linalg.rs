//! Dense least-squares helpers on top of nalgebra's SVD.

use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

fn matrix(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn pinv_apply(a: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return Some(DVector::zeros(a.ncols()));
    }
    svd.solve(r, RANK_TOL * smax).ok()
}

/// Closest point to `c` on `{x : A x = b}` as `c - A⁺(Ac - b)`.
///
/// Returns the point and `max |A x - b|`, which is nonzero exactly when the
/// system is inconsistent.
pub fn project_onto_affine(rows: &[Vec<f64>], b: &[f64], c: &[f64]) -> Option<(Vec<f64>, f64)> {
    let d = c.len();
    if rows.is_empty() {
        return Some((c.to_vec(), 0.0));
    }
    let a = matrix(rows, d);
    let cv = DVector::from_column_slice(c);
    let bv = DVector::from_column_slice(b);
    let r = &a * &cv - &bv;
    let corr = pinv_apply(&a, &r)?;
    let x = cv - corr;
    let res = (&a * &x - bv).amax();
    Some((x.iter().copied().collect(), res))
}

/// Component of `v` orthogonal to every row of `normals`.
pub fn project_tangent(normals: &[Vec<f64>], v: &[f64]) -> Option<Vec<f64>> {
    if normals.is_empty() {
        return Some(v.to_vec());
    }
    let at = matrix(normals, v.len()).transpose();
    let vv = DVector::from_column_slice(v);
    let y = pinv_apply(&at, &vv)?;
    let out = vv - at * y;
    Some(out.iter().copied().collect())
}

/// Least-squares solution of `M β = r` where `M` has the given columns.
pub fn lstsq_columns(cols: &[Vec<f64>], r: &[f64]) -> Option<Vec<f64>> {
    let m = DMatrix::from_fn(r.len(), cols.len(), |i, j| cols[j][i]);
    let rv = DVector::from_column_slice(r);
    pinv_apply(&m, &rv).map(|b| b.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn affine_projection_on_line() {
        // x0 + x1 = 1, project origin
        let (x, res) = project_onto_affine(&[vec![1.0, 1.0]], &[1.0], &[0.0, 0.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15 && (x[1] - 0.5).abs() < 1e-15);
        assert!(res < 1e-15);
    }

    #[test]
    fn inconsistent_system_has_residual() {
        let rows = [vec![1.0, 0.0], vec![1.0, 0.0]];
        let (_, res) = project_onto_affine(&rows, &[0.0, 1.0], &[3.0, 3.0]).unwrap();
        assert!((res - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tangent_projection_removes_normal() {
        let v = project_tangent(&[vec![0.0, 2.0]], &[3.0, -4.0]).unwrap();
        assert!((v[0] - 3.0).abs() < 1e-15 && v[1].abs() < 1e-15);
    }
}
