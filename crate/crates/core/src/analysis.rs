//! Passivity, stability and admissibility diagnostics.
//!
//! Frequency-grid checks only ever produce *evidence* of positive realness;
//! a certificate comes from the LMI route ([`lmi_residual`]).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, block2x2, sym};
use crate::model::LtiSystem;

/// Relative rank tolerance used for kernels of E and index tests.
pub const RANK_RTOL: f64 = 1e-10;
/// Reciprocal condition below which `sE - A` counts as singular.
const POLE_RCOND: f64 = 1e-13;

type CMatrix = DMatrix<Complex64>;

fn to_complex(x: &DMatrix<f64>) -> CMatrix {
    x.map(|v| Complex64::new(v, 0.0))
}

/// `G(s) = C (sE - A)⁻¹ B + D`.
pub fn transfer_eval(sys: &LtiSystem, s: Complex64) -> Result<CMatrix> {
    let pencil = to_complex(&sys.e) * s - to_complex(&sys.a);
    if sys.n() > 0 {
        let sv = pencil.clone().singular_values();
        let (hi, lo) = (sv.max(), sv.min());
        if !(hi > 0.0 && lo / hi > POLE_RCOND) {
            return Err(Error::PoleAt(s));
        }
    }
    let x = pencil.lu().solve(&to_complex(&sys.b)).ok_or(Error::PoleAt(s))?;
    Ok(to_complex(&sys.c) * x + to_complex(&sys.d))
}

/// Smallest eigenvalue of the Hermitian matrix `G(jw) + G(jw)*`.
pub fn popov_min_eig(sys: &LtiSystem, w: f64) -> Result<f64> {
    let g = transfer_eval(sys, Complex64::new(0.0, w))?;
    let h = &g + g.adjoint();
    let eig = nalgebra::SymmetricEigen::try_new(h, 1e-15, 10_000).ok_or(Error::EigFailure)?;
    Ok(eig.eigenvalues.min())
}

/// Generalized eigenvalues of the pencil `zE - A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PencilEigs {
    pub finite: Vec<Complex64>,
    /// Algebraic multiplicity of the eigenvalue ∞.
    pub infinite: usize,
    /// Largest real part over the finite eigenvalues (−∞ if there are none).
    pub max_real: f64,
    pub regular: bool,
    /// Length of the longest Jordan chain at ∞ (0 when E is invertible).
    pub infinite_chain: usize,
}

/// Probe points for regularity and shift selection, scaled by `‖A‖/‖E‖`.
const PROBES: [f64; 6] = [0.7173, -1.3291, 2.1178, -0.4103, 3.0517, -2.6711];

/// Finite generalized eigenvalues of `(E, A)`.
///
/// The pencil is inverted at a shift σ with `A - σE` well conditioned:
/// eigenvalues μ of `M = (A - σE)⁻¹ E` map to `λ = σ + 1/μ`, and μ = 0 to ∞.
/// The multiplicity of ∞ is read off the stabilized kernel dimension of the
/// powers of M, so defective (index ≥ 2) infinite eigenvalues are not
/// mistaken for huge finite ones; the finite eigenvalues are the remaining μ of
/// largest modulus.
pub fn pencil_eigs(e: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<PencilEigs> {
    let n = a.nrows();
    if e.shape() != (n, n) || !a.is_square() {
        return Err(Error::Dimension("pencil matrices must be square and equal-sized".into()));
    }
    if n == 0 {
        return Ok(PencilEigs { finite: vec![], infinite: 0, max_real: f64::NEG_INFINITY, regular: true, infinite_chain: 0 });
    }
    let ne = linalg::spectral_norm(e);
    let na = linalg::spectral_norm(a);
    let scale = if ne > 0.0 && na > 0.0 { na / ne } else { 1.0 };
    let (sigma, rc) = PROBES
        .iter()
        .map(|&p| {
            let s = p * scale;
            (s, linalg::rcond2(&(a - e * s)))
        })
        .fold((0.0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if rc <= 1e-13 {
        let complex_ok = PROBES.iter().any(|&p| {
            let s = Complex64::new(0.3 * p * scale, p * scale);
            let pen = to_complex(e) * s - to_complex(a);
            let sv = pen.singular_values();
            sv.max() > 0.0 && sv.min() / sv.max() > 1e-13
        });
        if !complex_ok {
            return Err(Error::SingularPencil);
        }
        // regular but every real probe is (numerically) an eigenvalue
        return Err(Error::SolverFailed("no usable real shift for the pencil".into()));
    }
    let shifted = (a - e * sigma).try_inverse().ok_or(Error::SingularPencil)?;
    let mmat = shifted * e;

    // kernel dimensions of M, M², … until they stabilize
    let mut power = mmat.clone();
    let mut prev = 0usize;
    let mut chain = 0usize;
    let mut kernel_dim = 0usize;
    for k in 1..=n {
        kernel_dim = n - linalg::rank(&power, RANK_RTOL);
        if kernel_dim == prev {
            break;
        }
        chain = k;
        prev = kernel_dim;
        if k < n {
            power = &power * &mmat;
        }
    }
    let infinite = kernel_dim;

    let schur = nalgebra::Schur::try_new(mmat, f64::EPSILON, 100_000).ok_or(Error::EigFailure)?;
    let mut mus: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    mus.sort_by(|x, y| y.norm().total_cmp(&x.norm()));
    let finite: Vec<Complex64> = mus[..n - infinite]
        .iter()
        .map(|mu| Complex64::new(sigma, 0.0) + mu.inv())
        .collect();
    let max_real = finite.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(PencilEigs { finite, infinite, max_real, regular: true, infinite_chain: chain })
}

/// Index ≤ 1 test for a regular pair: with V spanning ker E, `[E, A V]` must
/// have full row rank.
pub fn index_le_one(e: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<bool> {
    pencil_eigs(e, a)?;
    let n = e.nrows();
    let v = linalg::null_space(e, RANK_RTOL);
    if v.ncols() == 0 {
        return Ok(true);
    }
    let av = a * &v;
    let mut stacked = DMatrix::zeros(n, n + v.ncols());
    stacked.view_mut((0, 0), (n, n)).copy_from(e);
    stacked.view_mut((0, n), (n, v.ncols())).copy_from(&av);
    Ok(linalg::rank(&stacked, RANK_RTOL) == n)
}

/// `[AᵀX + XᵀA, XᵀB - Cᵀ; BᵀX - C, -D - Dᵀ]`.
pub fn lmi_block(sys: &LtiSystem, x: &DMatrix<f64>) -> DMatrix<f64> {
    let xt = x.transpose();
    let top_left = sys.a.transpose() * x + &xt * &sys.a;
    let top_right = &xt * &sys.b - sys.c.transpose();
    let bottom = -(&sys.d + sys.d.transpose());
    block2x2(&top_left, &top_right, &top_right.transpose(), &bottom)
}

/// Residuals of the positive-real LMIs at a candidate X.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LmiResidual {
    /// λ_max of the (n+m) block matrix; ≤ 0 required.
    pub lambda_max_block: f64,
    /// λ_min of sym(EᵀX); ≥ 0 required.
    pub lambda_min_etx: f64,
    /// ‖EᵀX - XᵀE‖_F; 0 required.
    pub asym_norm: f64,
}

impl LmiResidual {
    /// Non-strict LMIs hold within `tol`.
    pub fn certifies(&self, tol: f64) -> bool {
        self.lambda_max_block <= tol && self.lambda_min_etx >= -tol && self.asym_norm <= tol
    }

    /// Strict LMIs hold: the block matrix is negative definite beyond `tol`.
    pub fn certifies_strict(&self, tol: f64) -> bool {
        self.lambda_max_block < -tol && self.lambda_min_etx >= -tol && self.asym_norm <= tol
    }
}

pub fn lmi_residual(sys: &LtiSystem, x: &DMatrix<f64>) -> Result<LmiResidual> {
    if x.shape() != (sys.n(), sys.n()) {
        return Err(Error::Dimension("X must be n x n".into()));
    }
    let etx = sys.e.transpose() * x;
    Ok(LmiResidual {
        lambda_max_block: linalg::lambda_max(&lmi_block(sys, x))?,
        lambda_min_etx: linalg::lambda_min(&etx)?,
        asym_norm: (&etx - etx.transpose()).norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianCheck {
    #[serde(skip)]
    pub h: DMatrix<f64>,
    /// min |Re λ| over the spectrum of H.
    pub min_abs_real: f64,
    /// No eigenvalue of H within tolerance of the imaginary axis.
    pub positive_real: bool,
}

/// Hamiltonian-matrix test for standard systems with `D + Dᵀ ≻ 0` and A
/// asymptotically stable: positive real iff H has no imaginary eigenvalues.
pub fn hamiltonian_check(sys: &LtiSystem) -> Result<HamiltonianCheck> {
    if !sys.is_standard() {
        return Err(Error::PreconditionViolated("E must be the identity".into()));
    }
    let dd = &sys.d + sys.d.transpose();
    if sys.m() > 0 && linalg::lambda_min(&dd)? <= 0.0 {
        return Err(Error::PreconditionViolated("D + Dᵀ is not positive definite".into()));
    }
    let eigs = pencil_eigs(&sys.e, &sys.a)?;
    if eigs.max_real >= 0.0 {
        return Err(Error::PreconditionViolated("A is not asymptotically stable".into()));
    }
    let dd_inv = dd.clone().try_inverse().ok_or(Error::PreconditionViolated("D + Dᵀ is singular".into()))?;
    let a_hat = &sys.a - &sys.b * &dd_inv * &sys.c;
    let h = block2x2(
        &a_hat,
        &(-(&sys.b * &dd_inv * sys.b.transpose())),
        &(sys.c.transpose() * &dd_inv * &sys.c),
        &(-a_hat.transpose()),
    );
    let schur = nalgebra::Schur::try_new(h.clone(), f64::EPSILON, 100_000).ok_or(Error::EigFailure)?;
    let min_abs_real = schur
        .complex_eigenvalues()
        .iter()
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    let tol = 1e-8 * linalg::spectral_norm(&h).max(1.0);
    Ok(HamiltonianCheck { h, min_abs_real, positive_real: min_abs_real > tol })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportOptions {
    pub grid_points: usize,
    pub w_min: f64,
    pub w_max: f64,
    pub include_zero: bool,
    /// Candidate X for the LMI residuals (e.g. Q of a PH form).
    #[serde(skip)]
    pub lmi_x: Option<DMatrix<f64>>,
    /// Also solve the relaxed LMI problem for δ* (and use X* if no X is given).
    pub solve_delta: bool,
    /// Tolerance for the LMI verdicts.
    pub lmi_tol: f64,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self { grid_points: 200, w_min: 1e-3, w_max: 1e3, include_zero: true, lmi_x: None, solve_delta: false, lmi_tol: 1e-9 }
    }
}

impl ReportOptions {
    /// `w = 0` (optionally) followed by a logarithmic grid on `[w_min, w_max]`.
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid_points + 1);
        if self.include_zero {
            out.push(0.0);
        }
        let (lo, hi) = (self.w_min.log10(), self.w_max.log10());
        let k = self.grid_points;
        for i in 0..k {
            let t = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
            out.push(10f64.powf(lo + t * (hi - lo)));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiReport {
    pub x_source: String,
    pub residual: LmiResidual,
    /// Non-strict LMIs certified: the system is positive real.
    pub certified_pr: bool,
    /// Strict LMIs certified: admissible, ESPR with D + Dᵀ ≻ 0.
    pub certified_strict: bool,
}

/// Evidence bundle for one system. Field failures are recorded in `errors`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub m: usize,
    pub regular: Option<bool>,
    pub finite_eigenvalues: Vec<Complex64>,
    pub infinite_eigenvalues: usize,
    pub max_real_part: Option<f64>,
    pub index_le_one: Option<bool>,
    pub asymptotically_stable: Option<bool>,
    pub admissible: Option<bool>,
    /// Finite eigenvalues whose real part is within tolerance of zero.
    pub borderline_eigenvalues: Vec<Complex64>,
    pub frequencies: Vec<f64>,
    /// λ_min(G(jw) + G(jw)*) per frequency; `None` at a pole.
    pub popov_min_eig: Vec<Option<f64>>,
    pub grid_min: Option<f64>,
    pub grid_argmin: Option<f64>,
    /// Grid evidence only, never a certificate.
    pub grid_evidence: String,
    pub lmi: Option<LmiReport>,
    pub hamiltonian: Option<HamiltonianCheck>,
    pub delta_star: Option<f64>,
    pub errors: Vec<String>,
}

impl DiagnosticsReport {
    /// All grid samples strictly positive (and none at a pole).
    pub fn grid_positive(&self) -> bool {
        !self.popov_min_eig.is_empty() && self.popov_min_eig.iter().all(|v| matches!(v, Some(x) if *x > 0.0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

pub fn passivity_report(sys: &LtiSystem, opts: &ReportOptions) -> DiagnosticsReport {
    let mut errors = Vec::new();
    let mut report = DiagnosticsReport {
        n: sys.n(),
        m: sys.m(),
        regular: None,
        finite_eigenvalues: vec![],
        infinite_eigenvalues: 0,
        max_real_part: None,
        index_le_one: None,
        asymptotically_stable: None,
        admissible: None,
        borderline_eigenvalues: vec![],
        frequencies: vec![],
        popov_min_eig: vec![],
        grid_min: None,
        grid_argmin: None,
        grid_evidence: String::new(),
        lmi: None,
        hamiltonian: None,
        delta_star: None,
        errors: vec![],
    };

    match pencil_eigs(&sys.e, &sys.a) {
        Ok(eigs) => {
            report.regular = Some(true);
            let scale = eigs.finite.iter().map(|l| l.norm()).fold(1.0, f64::max);
            report.borderline_eigenvalues =
                eigs.finite.iter().copied().filter(|l| l.re.abs() <= 1e-8 * scale).collect();
            report.max_real_part = (!eigs.finite.is_empty()).then_some(eigs.max_real);
            report.asymptotically_stable = Some(eigs.max_real < 0.0);
            report.finite_eigenvalues = eigs.finite;
            report.infinite_eigenvalues = eigs.infinite;
        }
        Err(Error::SingularPencil) => report.regular = Some(false),
        Err(e) => errors.push(format!("pencil eigenvalues: {e}")),
    }
    if report.regular == Some(true) {
        match index_le_one(&sys.e, &sys.a) {
            Ok(v) => report.index_le_one = Some(v),
            Err(e) => errors.push(format!("index test: {e}")),
        }
    }
    if let (Some(r), Some(i), Some(s)) = (report.regular, report.index_le_one, report.asymptotically_stable) {
        report.admissible = Some(r && i && s);
    }

    report.frequencies = opts.frequencies();
    for &w in &report.frequencies {
        match popov_min_eig(sys, w) {
            Ok(v) => report.popov_min_eig.push(Some(v)),
            Err(Error::PoleAt(_)) => report.popov_min_eig.push(None),
            Err(e) => {
                errors.push(format!("G(j{w}): {e}"));
                report.popov_min_eig.push(None);
            }
        }
    }
    if let Some((w, v)) = report
        .frequencies
        .iter()
        .zip(&report.popov_min_eig)
        .filter_map(|(w, v)| v.map(|v| (*w, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
    {
        report.grid_min = Some(v);
        report.grid_argmin = Some(w);
    }
    report.grid_evidence = if report.grid_positive() {
        "evidence: G(jw) + G(jw)* positive definite on the whole grid".into()
    } else if report.grid_min.is_some_and(|v| v < 0.0) {
        format!(
            "evidence against PR: λ_min(G(jw) + G(jw)*) = {:.6e} at w = {:.6e}",
            report.grid_min.unwrap_or(f64::NAN),
            report.grid_argmin.unwrap_or(f64::NAN)
        )
    } else {
        "inconclusive: grid touches a pole or zero".into()
    };

    if opts.solve_delta {
        match crate::init::solve_delta_lmi(sys) {
            Ok(lmi) => {
                report.delta_star = Some(lmi.delta_star);
                if opts.lmi_x.is_none() {
                    report.lmi = lmi_report(sys, &lmi.x_star, "X*", opts.lmi_tol, &mut errors);
                }
            }
            Err(e) => errors.push(format!("relaxed LMIs: {e}")),
        }
    }
    if let Some(x) = &opts.lmi_x {
        report.lmi = lmi_report(sys, x, "Q", opts.lmi_tol, &mut errors);
    }

    if sys.is_standard() {
        match hamiltonian_check(sys) {
            Ok(h) => report.hamiltonian = Some(h),
            Err(e) => errors.push(format!("hamiltonian test: {e}")),
        }
    }
    report.errors = errors;
    report
}

fn lmi_report(
    sys: &LtiSystem,
    x: &DMatrix<f64>,
    source: &str,
    tol: f64,
    errors: &mut Vec<String>,
) -> Option<LmiReport> {
    match lmi_residual(sys, x) {
        Ok(res) => {
            // scale-aware tolerance for the block eigenvalue
            let scale = linalg::spectral_norm(&lmi_block(sys, x)).max(1.0);
            let scaled = LmiResidual { lambda_max_block: res.lambda_max_block / scale, ..res };
            Some(LmiReport {
                x_source: source.to_string(),
                residual: res,
                certified_pr: scaled.certifies(tol),
                certified_strict: scaled.certifies_strict(tol),
            })
        }
        Err(e) => {
            errors.push(format!("LMI residual: {e}"));
            None
        }
    }
}

/// Symmetric part helper re-exported for callers assembling LMIs.
pub fn symmetric_part(x: &DMatrix<f64>) -> DMatrix<f64> {
    sym(x)
}
