//! Frobenius-norm projections onto the feasible sets of the PH parameterization.

use nalgebra::{DMatrix, SMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, skew, sym};
use crate::model::PhForm;

/// Eigenvalue lower bounds imposed by [`project_ph`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bounds {
    /// Lower bound on the eigenvalues of the cost matrix K.
    pub delta_k: f64,
    /// Lower bound on the eigenvalues of Z (of Q in standard mode, where `Z = Q`).
    pub nu_z: f64,
}

/// Nearest skew-symmetric matrix, `(X - Xᵀ)/2`.
pub fn project_skew(x: &DMatrix<f64>) -> DMatrix<f64> {
    skew(x)
}

/// Nearest symmetric matrix with all eigenvalues `>= lb`.
///
/// Inputs that already satisfy the bound are returned as their symmetric part
/// without a round trip through the eigenvector basis.
pub fn project_psd(x: &DMatrix<f64>, lb: f64) -> Result<DMatrix<f64>> {
    if !linalg::all_finite(x) {
        return Err(Error::EigFailure);
    }
    // small sizes on the stack
    macro_rules! fixed {
        ($($k:literal)*) => {
            match x.nrows() {
                $($k => {
                    let xf = SMatrix::<f64, $k, $k>::from_column_slice(x.as_slice());
                    let s = (xf + xf.transpose()) * 0.5;
                    let shifted = s - SMatrix::<f64, $k, $k>::identity() * lb;
                    if shifted.cholesky().is_some() {
                        return Ok(DMatrix::from_column_slice($k, $k, s.as_slice()));
                    }
                    let eig = SymmetricEigen::try_new(s, linalg::EIG_EPS, linalg::EIG_MAX_ITERS).ok_or(Error::EigFailure)?;
                    if eig.eigenvalues.iter().all(|&l| l >= lb) {
                        return Ok(DMatrix::from_column_slice($k, $k, s.as_slice()));
                    }
                    let v = eig.eigenvectors;
                    let mut scaled = v;
                    for (j, mut col) in scaled.column_iter_mut().enumerate() {
                        col *= eig.eigenvalues[j].max(lb);
                    }
                    let p = scaled * v.transpose();
                    let p = (p + p.transpose()) * 0.5;
                    return Ok(DMatrix::from_column_slice($k, $k, p.as_slice()));
                })*
                _ => {}
            }
        };
    }
    fixed!(1 2 3 4 5 6 7 8 9 10 11 12);
    let s = sym(x);
    let shifted = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| if i == j { s[(i, j)] - lb } else { s[(i, j)] });
    if shifted.cholesky().is_some() {
        return Ok(s);
    }
    let eig = linalg::sym_eigen(&s)?;
    if eig.eigenvalues.iter().all(|&l| l >= lb) {
        return Ok(s);
    }
    let clipped = eig.eigenvalues.map(|l| l.max(lb));
    let v = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| v[(i, j)] * clipped[j]);
    Ok(sym(&(scaled * v.transpose())))
}

/// Project every constrained block of a PH form onto its feasible set:
/// J skew, `K = [R P; Pᵀ S] ⪰ δ_K I` (jointly), and `Q ⪰ ν I` (standard) or
/// `Z ⪰ ν I` (descriptor). F and N are left alone.
pub fn project_ph(ph: &PhForm, bounds: &Bounds) -> Result<PhForm> {
    let k = project_psd(&ph.cost_matrix(), bounds.delta_k)?;
    let (q, z) = match &ph.z {
        None => (project_psd(&ph.q, bounds.nu_z)?, None),
        Some(z) => (ph.q.clone(), Some(project_psd(z, bounds.nu_z)?)),
    };
    let mut out = PhForm {
        j: project_skew(&ph.j),
        r: DMatrix::zeros(0, 0),
        q,
        f: ph.f.clone(),
        p: DMatrix::zeros(0, 0),
        s: DMatrix::zeros(0, 0),
        n: ph.n.clone(),
        z,
    };
    out.set_cost_matrix(&k);
    Ok(out)
}
