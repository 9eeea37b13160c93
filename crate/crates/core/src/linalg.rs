//! Dense linear-algebra helpers shared by the solver and the diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub(crate) const EIG_EPS: f64 = 1e-15;
pub(crate) const EIG_MAX_ITERS: usize = 10_000;

/// Symmetric part `(X + Xᵀ)/2`.
pub fn sym(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = x.clone();
    for j in 0..x.ncols() {
        for i in 0..j {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Skew-symmetric part `(X - Xᵀ)/2`.
pub fn skew(x: &DMatrix<f64>) -> DMatrix<f64> {
    (x - x.transpose()) * 0.5
}

/// Squared Frobenius norm.
pub fn frob2(x: &DMatrix<f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn all_finite(x: &DMatrix<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Eigendecomposition of the symmetric part of `x`.
pub fn sym_eigen(x: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !all_finite(x) {
        return Err(Error::EigFailure);
    }
    SymmetricEigen::try_new(sym(x), EIG_EPS, EIG_MAX_ITERS).ok_or(Error::EigFailure)
}

pub fn lambda_min(x: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eigen(x)?.eigenvalues.min())
}

pub fn lambda_max(x: &DMatrix<f64>) -> Result<f64> {
    Ok(sym_eigen(x)?.eigenvalues.max())
}

/// Singular values in nonincreasing order.
pub fn singular_values(x: &DMatrix<f64>) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let mut sv: Vec<f64> = x.clone().singular_values().iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest singular value.
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    singular_values(x).first().copied().unwrap_or(0.0)
}

/// Numerical rank with tolerance `rtol * σ_max`.
pub fn rank(x: &DMatrix<f64>, rtol: f64) -> usize {
    let sv = singular_values(x);
    let Some(&smax) = sv.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rtol * smax).count()
}

/// Orthonormal basis of the right null space of a square matrix.
pub fn null_space(x: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    let n = x.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // pad wide matrices with zero rows so the SVD yields a full V
    let padded = if x.nrows() < n { x.clone().resize_vertically(n, 0.0) } else { x.clone() };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let basis: Vec<nalgebra::DVector<f64>> = (0..svd.singular_values.len())
        .filter(|&i| smax == 0.0 || svd.singular_values[i] <= rtol * smax)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if basis.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&basis)
}

/// Inverse together with a reciprocal 1-norm condition number
/// `1 / (‖X‖₁ ‖X⁻¹‖₁)`. Returns `None` for an exactly singular matrix.
pub fn inverse_with_rcond(x: &DMatrix<f64>) -> Option<(DMatrix<f64>, f64)> {
    let inv = x.clone().try_inverse()?;
    if !all_finite(&inv) {
        return None;
    }
    let rcond = 1.0 / (norm1(x) * norm1(&inv));
    Some((inv, rcond))
}

/// Reciprocal 2-norm condition number `σ_min / σ_max`.
pub fn rcond2(x: &DMatrix<f64>) -> f64 {
    let sv = singular_values(x);
    match (sv.first(), sv.last()) {
        (Some(&hi), Some(&lo)) if hi > 0.0 => lo / hi,
        _ => 0.0,
    }
}

/// Maximum absolute column sum.
pub fn norm1(x: &DMatrix<f64>) -> f64 {
    x.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `[a b; c d]` from four conforming blocks.
pub fn block2x2(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    d: &DMatrix<f64>,
) -> DMatrix<f64> {
    let (r1, c1) = a.shape();
    let (r2, c2) = d.shape();
    let mut out = DMatrix::zeros(r1 + r2, c1 + c2);
    out.view_mut((0, 0), (r1, c1)).copy_from(a);
    out.view_mut((0, c1), (r1, c2)).copy_from(b);
    out.view_mut((r1, 0), (r2, c1)).copy_from(c);
    out.view_mut((r1, c1), (r2, c2)).copy_from(d);
    out
}

pub fn block_diag(a: &DMatrix<f64>, d: &DMatrix<f64>) -> DMatrix<f64> {
    block2x2(
        a,
        &DMatrix::zeros(a.nrows(), d.ncols()),
        &DMatrix::zeros(d.nrows(), a.ncols()),
        d,
    )
}

pub fn is_identity(x: &DMatrix<f64>) -> bool {
    x.is_square()
        && x.iter().enumerate().all(|(k, &v)| {
            let (i, j) = (k % x.nrows(), k / x.nrows());
            v == if i == j { 1.0 } else { 0.0 }
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_rank_deficient_matrix() {
        let e = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let v = null_space(&e, 1e-12);
        assert_eq!(v.ncols(), 2);
        assert!((&e * &v).norm() < 1e-14);
        assert!((v.transpose() * &v - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn null_space_of_zero_is_everything() {
        let v = null_space(&DMatrix::zeros(2, 2), 1e-12);
        assert_eq!(v.ncols(), 2);
    }

    #[test]
    fn rcond_of_diagonal() {
        let x = DMatrix::from_diagonal(&nalgebra::dvector![4.0, 0.5]);
        assert!((rcond2(&x) - 0.125).abs() < 1e-15);
        let (inv, rc) = inverse_with_rcond(&x).unwrap();
        assert!((inv[(1, 1)] - 2.0).abs() < 1e-15);
        assert!((rc - 0.125).abs() < 1e-15);
    }

    #[test]
    fn identity_detection_is_exact() {
        let mut i = DMatrix::<f64>::identity(3, 3);
        assert!(is_identity(&i));
        i[(0, 1)] = 1e-300;
        assert!(!is_identity(&i));
    }
}
