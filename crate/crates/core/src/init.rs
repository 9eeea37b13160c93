//! Initial PH forms for the fast gradient method.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, skew, sym};
use crate::model::{LtiSystem, Mode, PhForm, Weights};
use crate::projections::{project_ph, project_psd, Bounds};
use crate::sdp::{self, ConicProblem, SolveQuality};

/// Reciprocal condition number of X* below which the formula initialization refuses.
pub const X_RCOND_MIN: f64 = 1e-12;
/// Conic solver tolerance for the LMI problems.
pub const SDP_TOL: f64 = 1e-8;
/// Default conditioning cap for random Q.
pub const DEFAULT_KAPPA: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverStatus {
    Optimal,
    Inaccurate,
    Failed,
}

/// Solution of the relaxed positive-real LMIs.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiInitResult {
    pub delta_star: f64,
    pub x_star: DMatrix<f64>,
    pub status: SolverStatus,
    /// 1-norm reciprocal condition estimate of X*.
    pub rcond: f64,
}

/// Closed-form initialization at `Q = I`, `P = 0`.
pub fn init_standard(target: &LtiSystem, mode: Mode) -> Result<PhForm> {
    let (n, m) = (target.n(), target.m());
    let mut ph = PhForm::zeros(n, m, mode);
    ph.q = DMatrix::identity(n, n);
    ph.j = skew(&target.a);
    ph.r = project_psd(&(-sym(&target.a)), 0.0)?;
    ph.s = project_psd(&sym(&target.d), 0.0)?;
    ph.n = skew(&target.d);
    ph.f = (&target.b + target.c.transpose()) * 0.5;
    if mode == Mode::Descriptor {
        ph.z = Some(project_psd(&target.e.transpose(), 0.0)?);
    }
    Ok(ph)
}

/// Minimizer over F of `‖B - (F - P)‖² + ‖Cᵀ - Qᵀ(F + P)‖²`:
/// `(I + QQᵀ)⁻¹ (P + B + QCᵀ - QQᵀP)`.
pub fn optimal_f(
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = q.nrows();
    let qqt = q * q.transpose();
    let lhs = DMatrix::identity(n, n) + &qqt;
    let rhs = p + b + q * c.transpose() - &qqt * p;
    let chol = lhs.cholesky().ok_or(Error::EigFailure)?;
    Ok(chol.solve(&rhs))
}

/// Relaxed LMIs: minimize δ over (δ, X) with
/// `[-AᵀX - XᵀA, Cᵀ - XᵀB; C - BᵀX, D + Dᵀ] + δI ⪰ 0`, `EᵀX + δI ⪰ 0`,
/// `EᵀX = XᵀE` and `δ ≥ 0`.
pub fn solve_delta_lmi(target: &LtiSystem) -> Result<LmiInitResult> {
    let (n, m) = (target.n(), target.m());
    let nv = n * n + 1;
    let dvar = n * n;
    let xvar = |i: usize, j: usize| i + j * n;
    let mut prob = ConicProblem::new(nv);
    prob.q[dvar] = 1.0;

    let big = n + m;
    let constant = linalg::block2x2(
        &DMatrix::zeros(n, n),
        &target.c.transpose(),
        &target.c,
        &(&target.d + target.d.transpose()),
    );
    let mut terms = Vec::with_capacity(nv);
    for j in 0..n {
        for i in 0..n {
            // unit X = e_i e_jᵀ
            let mut unit = DMatrix::zeros(n, n);
            unit[(i, j)] = 1.0;
            let tl = -(target.a.transpose() * &unit + unit.transpose() * &target.a);
            let tr = -(unit.transpose() * &target.b);
            let coef = linalg::block2x2(&tl, &tr, &tr.transpose(), &DMatrix::zeros(m, m));
            terms.push((xvar(i, j), coef));
        }
    }
    terms.push((dvar, DMatrix::identity(big, big)));
    prob.push_lmi(&constant, &terms);

    let mut eterms = Vec::with_capacity(nv);
    for j in 0..n {
        for i in 0..n {
            let mut unit = DMatrix::zeros(n, n);
            unit[(i, j)] = 1.0;
            eterms.push((xvar(i, j), target.e.transpose() * unit));
        }
    }
    eterms.push((dvar, DMatrix::identity(n, n)));
    prob.push_lmi(&DMatrix::zeros(n, n), &eterms);

    // (EᵀX)_{kl} - (EᵀX)_{lk} = Σ_i E_{ik} X_{il} - E_{il} X_{ik}
    let mut eqs = Vec::new();
    for l in 0..n {
        for k in 0..l {
            let mut row = Vec::with_capacity(2 * n);
            for i in 0..n {
                row.push((xvar(i, l), target.e[(i, k)]));
                row.push((xvar(i, k), -target.e[(i, l)]));
            }
            eqs.push((merge_terms(row), 0.0));
        }
    }
    prob.push_equalities(&homogeneous_row_basis(&eqs, nv));
    prob.push_nonneg(dvar);

    let sol = sdp::solve_conic(&prob, SDP_TOL)?;
    let x_star = DMatrix::from_column_slice(n, n, &sol.x[..n * n]);
    let delta_star = sol.x[dvar].max(0.0);
    let rcond = linalg::inverse_with_rcond(&x_star).map_or(0.0, |(_, r)| r);
    Ok(LmiInitResult {
        delta_star,
        x_star,
        status: match sol.quality {
            SolveQuality::Optimal => SolverStatus::Optimal,
            SolveQuality::Inaccurate => SolverStatus::Inaccurate,
        },
        rcond,
    })
}

/// Orthonormal basis of the row space of homogeneous equalities. A singular E
/// makes the symmetry conditions on EᵀX linearly dependent, which the conic
/// solver cannot factor.
fn homogeneous_row_basis(rows: &[(Vec<(usize, f64)>, f64)], nv: usize) -> Vec<(Vec<(usize, f64)>, f64)> {
    if rows.is_empty() {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(rows.len(), nv);
    for (r, (coefs, _)) in rows.iter().enumerate() {
        for &(v, c) in coefs {
            m[(r, v)] += c;
        }
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors");
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = smax * 1e-10;
    svd.singular_values
        .iter()
        .enumerate()
        .filter(|&(_, &s)| s > tol)
        .map(|(k, _)| {
            let coefs = (0..nv).filter_map(|v| {
                let c: f64 = vt[(k, v)];
                (c.abs() > 1e-15).then_some((v, c))
            });
            (coefs.collect(), 0.0)
        })
        .collect()
}

fn merge_terms(row: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut row = row;
    row.sort_by_key(|t| t.0);
    let mut out: Vec<(usize, f64)> = Vec::with_capacity(row.len());
    for (v, c) in row {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += c,
            _ => out.push((v, c)),
        }
    }
    out.retain(|t| t.1 != 0.0);
    out
}

/// Z for the LMI initializations: `P⪰(EᵀQ)` in descriptor mode.
fn lmi_z(target: &LtiSystem, q: &DMatrix<f64>, mode: Mode) -> Result<Option<DMatrix<f64>>> {
    match mode {
        Mode::Standard => Ok(None),
        Mode::Descriptor => Ok(Some(project_psd(&(target.e.transpose() * q), 0.0)?)),
    }
}

/// Explicit PH form from an invertible LMI solution X, projected onto the
/// feasible set: `Q = X`, `J, R` from the skew and symmetric parts of `AX⁻¹`,
/// `F, P = (±B + X⁻ᵀCᵀ)/2`, `S, N` from D. X need not be symmetric.
pub fn init_lmi_formula(target: &LtiSystem, lmi: &LmiInitResult, mode: Mode) -> Result<PhForm> {
    let (x_inv, rcond) = linalg::inverse_with_rcond(&lmi.x_star).ok_or(Error::IllConditionedX { rcond: 0.0 })?;
    if rcond < X_RCOND_MIN {
        return Err(Error::IllConditionedX { rcond });
    }
    let ax = &target.a * &x_inv;
    let xc = x_inv.transpose() * target.c.transpose();
    let ph = PhForm {
        j: skew(&ax),
        r: -sym(&ax),
        q: lmi.x_star.clone(),
        f: (&target.b + &xc) * 0.5,
        p: (&xc - &target.b) * 0.5,
        s: sym(&target.d),
        n: skew(&target.d),
        z: lmi_z(target, &lmi.x_star, mode)?,
    };
    project_ph(&ph, &Bounds::default())
}

/// Best (J, R, P, S, F) for fixed `Q = X*`: a convex quadratic program over
/// `J` skew and `K = [R P; Pᵀ S] ⪰ 0`, with `N = (D - Dᵀ)/2`.
pub fn init_lmi_solve(
    target: &LtiSystem,
    lmi: &LmiInitResult,
    mode: Mode,
    w: &Weights,
) -> Result<PhForm> {
    let (n, m) = (target.n(), target.m());
    let q = &lmi.x_star;
    if !linalg::all_finite(q) {
        return Err(Error::NonFinite("X*"));
    }
    let big = n + m;
    let nk = big * (big + 1) / 2;
    let nj = n * (n.saturating_sub(1)) / 2;
    let nf = n * m;
    let nv = nk + nj + nf;

    // variable layout: svec(K) | strict upper triangle of J | vec(F)
    let unpack = |x: &[f64]| -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let mut k = DMatrix::zeros(big, big);
        for j in 0..big {
            for i in 0..=j {
                let v = x[sdp::svec_index(i, j)];
                let v = if i == j { v } else { v / std::f64::consts::SQRT_2 };
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        let mut jm = DMatrix::zeros(n, n);
        let mut idx = nk;
        for j in 0..n {
            for i in 0..j {
                jm[(i, j)] = x[idx];
                jm[(j, i)] = -x[idx];
                idx += 1;
            }
        }
        let f = DMatrix::from_column_slice(n, m, &x[nk + nj..]);
        (k, jm, f)
    };
    let [w1, w2, w3, w4, _] = w.0.map(f64::sqrt);
    let d_sym = sym(&target.d);
    // r(x) = r0 + M x, stacked weighted residuals (linear part only for M)
    let residual = |x: &[f64], with_target: bool| -> Vec<f64> {
        let (k, jm, f) = unpack(x);
        let r = k.view((0, 0), (n, n));
        let p = k.view((0, n), (n, m));
        let s = k.view((n, n), (m, m));
        let mut ra = (&jm - r) * q;
        let mut rb = &f - p;
        let mut rc = (&f + p).transpose() * q;
        let mut rd = s.into_owned();
        if with_target {
            ra -= &target.a;
            rb -= &target.b;
            rc -= &target.c;
            rd -= &d_sym;
        }
        let mut out = Vec::with_capacity(n * n + 2 * n * m + m * m);
        out.extend(ra.iter().map(|v| v * w1));
        out.extend(rb.iter().map(|v| v * w2));
        out.extend(rc.iter().map(|v| v * w3));
        out.extend(rd.iter().map(|v| v * w4));
        out
    };
    let zero = vec![0.0; nv];
    let r0 = residual(&zero, true);
    let rows = r0.len();
    let mut mmat = DMatrix::zeros(rows, nv);
    let mut unit = vec![0.0; nv];
    for v in 0..nv {
        unit[v] = 1.0;
        let col = residual(&unit, false);
        mmat.column_mut(v).copy_from_slice(&col);
        unit[v] = 0.0;
    }
    let r0 = nalgebra::DVector::from_vec(r0);
    let hess = mmat.transpose() * &mmat * 2.0;
    let lin = mmat.transpose() * &r0 * 2.0;

    let mut prob = ConicProblem::new(nv);
    for j in 0..nv {
        for i in 0..=j {
            let h = hess[(i, j)];
            if h != 0.0 {
                prob.p.push((i, j, h));
            }
        }
    }
    prob.q = lin.iter().copied().collect();
    // K ⪰ 0: the slack is svec(K) itself
    let row0 = prob.b.len();
    for r in 0..nk {
        prob.a.push((row0 + r, r, -1.0));
        prob.b.push(0.0);
    }
    prob.cones.push(sdp::Cone::Psd(big));

    let sol = sdp::solve_conic(&prob, SDP_TOL)?;
    let (k, jm, f) = unpack(&sol.x);
    let mut ph = PhForm::zeros(n, m, mode);
    ph.j = jm;
    ph.q = q.clone();
    ph.f = f;
    ph.n = skew(&target.d);
    ph.set_cost_matrix(&k);
    ph.z = lmi_z(target, q, mode)?;
    project_ph(&ph, &Bounds::default())
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

/// `G Gᵀ` with its singular values floored at `σ_max / κ`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, kappa: f64) -> DMatrix<f64> {
    let g = gaussian(rng, n, n);
    let q = &g * g.transpose();
    let eig = linalg::sym_eigen(&q).expect("Gram matrix eigendecomposition");
    let smax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let floor = smax / kappa;
    let vals = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    sym(&(v * DMatrix::from_diagonal(&vals) * v.transpose()))
}

/// Random feasible blocks: Q = GGᵀ (conditioning capped by κ); J, Z and K are
/// Gaussian matrices projected onto their sets; N = 0; F Gaussian.
pub fn random_ph(n: usize, m: usize, mode: Mode, seed: u64, kappa: f64) -> Result<PhForm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ph = PhForm::zeros(n, m, mode);
    ph.q = random_spd(&mut rng, n, kappa);
    ph.j = skew(&gaussian(&mut rng, n, n));
    let k = project_psd(&gaussian(&mut rng, n + m, n + m), 0.0)?;
    ph.set_cost_matrix(&k);
    if mode == Mode::Descriptor {
        ph.z = Some(project_psd(&gaussian(&mut rng, n, n), 0.0)?);
    }
    ph.f = gaussian(&mut rng, n, m);
    Ok(ph)
}

/// Random initialization for a given target; F is the optimal one for the
/// sampled Q and P.
pub fn init_random(target: &LtiSystem, mode: Mode, seed: u64, kappa: f64) -> Result<PhForm> {
    let mut ph = random_ph(target.n(), target.m(), mode, seed, kappa)?;
    ph.f = optimal_f(&ph.q, &ph.p, &target.b, &target.c)?;
    Ok(ph)
}

/// Ground-truth initialization: `(J, R, Q, Z)` from the known form, `F = B`,
/// `P = 0`, `S = D`, `N = 0`, where B is the input matrix of the known form.
pub fn init_true(ph_true: &PhForm, target_d: &DMatrix<f64>) -> PhForm {
    let mut ph = ph_true.clone();
    ph.f = &ph_true.f - &ph_true.p;
    ph.p = DMatrix::zeros(ph.f.nrows(), ph.f.ncols());
    ph.s = target_d.clone();
    ph.n = DMatrix::zeros(target_d.nrows(), target_d.ncols());
    ph
}
