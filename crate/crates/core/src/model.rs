//! System and port-Hamiltonian (PH) form types, assembly, and the weighted
//! least-squares objective with its analytic gradient.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, frob2};

/// Reciprocal condition number below which Q counts as singular.
pub const Q_RCOND_MIN: f64 = 1e-12;

/// Whether E is fixed to the identity or free (through `Eᵀ = Z Q⁻¹`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Standard,
    Descriptor,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "standard" => Ok(Mode::Standard),
            "descriptor" => Ok(Mode::Descriptor),
            other => Err(format!("unknown mode `{other}` (expected standard|descriptor)")),
        }
    }
}

/// The quintuple `(E, A, B, C, D)` of `E x' = A x + B u, y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    pub e: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(
        e: DMatrix<f64>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        let m = d.nrows();
        let check = |name: &str, mat: &DMatrix<f64>, r: usize, c: usize| {
            if mat.shape() != (r, c) {
                Err(Error::Dimension(format!(
                    "{name} is {}x{}, expected {r}x{c}",
                    mat.nrows(),
                    mat.ncols()
                )))
            } else {
                Ok(())
            }
        };
        check("A", &a, n, n)?;
        check("E", &e, n, n)?;
        check("B", &b, n, m)?;
        check("C", &c, m, n)?;
        check("D", &d, m, m)?;
        for (name, mat) in [("E", &e), ("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if !linalg::all_finite(mat) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { e, a, b, c, d })
    }

    /// Standard system with `E = I`.
    pub fn standard(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        Self::new(DMatrix::identity(n, n), a, b, c, d)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.d.nrows()
    }

    /// True iff E is exactly the identity.
    pub fn is_standard(&self) -> bool {
        linalg::is_identity(&self.e)
    }

    /// `‖E‖² + ‖A‖² + ‖B‖² + ‖C‖² + ‖D‖²`.
    pub fn norm2(&self) -> f64 {
        self.blocks().iter().map(|m| frob2(m)).sum()
    }

    /// Unweighted squared Frobenius distance over all five matrices.
    pub fn distance2(&self, other: &LtiSystem) -> f64 {
        self.blocks()
            .iter()
            .zip(other.blocks())
            .map(|(x, y)| frob2(&(*x - y)))
            .sum()
    }

    /// Per-matrix relative errors `‖X - X̂‖_F / ‖X‖_F`, in percent.
    pub fn relative_errors(&self, approx: &LtiSystem) -> RelativeErrors {
        let rel = |x: &DMatrix<f64>, y: &DMatrix<f64>| {
            let nx = x.norm();
            let d = (x - y).norm();
            if nx == 0.0 {
                if d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                100.0 * d / nx
            }
        };
        RelativeErrors {
            e: rel(&self.e, &approx.e),
            a: rel(&self.a, &approx.a),
            b: rel(&self.b, &approx.b),
            c: rel(&self.c, &approx.c),
            d: rel(&self.d, &approx.d),
        }
    }

    pub fn blocks(&self) -> [&DMatrix<f64>; 5] {
        [&self.e, &self.a, &self.b, &self.c, &self.d]
    }
}

/// Relative errors in percent, one per system matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeErrors {
    pub e: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

/// Variable block of a PH form:
/// `A = (J - R) Q`, `B = F - P`, `C = (F + P)ᵀ Q`, `D = S + N`,
/// with cost matrix `K = [R P; Pᵀ S]`. In descriptor mode `Z = EᵀQ` is carried
/// explicitly and E is recovered from `Eᵀ = Z Q⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhForm {
    pub j: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub s: DMatrix<f64>,
    pub n: DMatrix<f64>,
    pub z: Option<DMatrix<f64>>,
}

impl PhForm {
    /// All-zero block of the given dimensions.
    pub fn zeros(n: usize, m: usize, mode: Mode) -> Self {
        Self {
            j: DMatrix::zeros(n, n),
            r: DMatrix::zeros(n, n),
            q: DMatrix::zeros(n, n),
            f: DMatrix::zeros(n, m),
            p: DMatrix::zeros(n, m),
            s: DMatrix::zeros(m, m),
            n: DMatrix::zeros(m, m),
            z: (mode == Mode::Descriptor).then(|| DMatrix::zeros(n, n)),
        }
    }

    pub fn mode(&self) -> Mode {
        if self.z.is_some() {
            Mode::Descriptor
        } else {
            Mode::Standard
        }
    }

    pub fn state_dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.s.nrows()
    }

    /// `K = [R P; Pᵀ S]`.
    pub fn cost_matrix(&self) -> DMatrix<f64> {
        linalg::block2x2(&self.r, &self.p, &self.p.transpose(), &self.s)
    }

    /// Overwrite R, P, S from a (symmetric) cost matrix.
    pub fn set_cost_matrix(&mut self, k: &DMatrix<f64>) {
        let n = self.state_dim();
        let m = k.nrows() - n;
        self.r = k.view((0, 0), (n, n)).into_owned();
        self.p = k.view((0, n), (n, m)).into_owned();
        self.s = k.view((n, n), (m, m)).into_owned();
    }

    /// `self + alpha * other`, blockwise.
    pub fn axpy(&self, alpha: f64, other: &PhForm) -> PhForm {
        PhForm {
            j: &self.j + &other.j * alpha,
            r: &self.r + &other.r * alpha,
            q: &self.q + &other.q * alpha,
            f: &self.f + &other.f * alpha,
            p: &self.p + &other.p * alpha,
            s: &self.s + &other.s * alpha,
            n: &self.n + &other.n * alpha,
            z: match (&self.z, &other.z) {
                (Some(a), Some(b)) => Some(a + b * alpha),
                (Some(a), None) => Some(a.clone()),
                _ => None,
            },
        }
    }

    /// Sum of squared Frobenius norms of all blocks.
    pub fn norm2(&self) -> f64 {
        [&self.j, &self.r, &self.q, &self.f, &self.p, &self.s, &self.n]
            .iter()
            .map(|m| frob2(m))
            .sum::<f64>()
            + self.z.as_ref().map_or(0.0, frob2)
    }

    pub fn is_finite(&self) -> bool {
        [&self.j, &self.r, &self.q, &self.f, &self.p, &self.s, &self.n]
            .iter()
            .all(|m| linalg::all_finite(m))
            && self.z.as_ref().is_none_or(linalg::all_finite)
    }
}

/// Nonnegative weights of the A, B, C, D and E terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights(pub [f64; 5]);

impl Default for Weights {
    fn default() -> Self {
        Weights([1.0; 5])
    }
}

impl Weights {
    /// Four or five weights; a missing E weight defaults to 1.
    pub fn from_slice(w: &[f64]) -> Result<Self> {
        let mut out = [1.0; 5];
        match w.len() {
            4 | 5 => out[..w.len()].copy_from_slice(w),
            k => {
                return Err(Error::Dimension(format!("expected 4 or 5 weights, got {k}")));
            }
        }
        if out.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::PreconditionViolated("weights must be finite and nonnegative".into()));
        }
        Ok(Weights(out))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Weights(self.0.map(|w| w * factor))
    }
}

/// `Q⁻¹`, failing when Q is numerically singular.
pub fn checked_inverse(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    match linalg::inverse_with_rcond(q) {
        Some((inv, rcond)) if rcond >= Q_RCOND_MIN => Ok(inv),
        Some((_, rcond)) => Err(Error::SingularQ { rcond }),
        None => Err(Error::SingularQ { rcond: 0.0 }),
    }
}

/// Build the system represented by a PH form.
pub fn assemble(ph: &PhForm) -> Result<LtiSystem> {
    let n = ph.state_dim();
    let a = (&ph.j - &ph.r) * &ph.q;
    let b = &ph.f - &ph.p;
    let c = (&ph.f + &ph.p).transpose() * &ph.q;
    let d = &ph.s + &ph.n;
    let e = match &ph.z {
        None => DMatrix::identity(n, n),
        Some(z) => (z * checked_inverse(&ph.q)?).transpose(),
    };
    LtiSystem::new(e, a, b, c, d)
}

/// `K = [R P; Pᵀ S]`.
pub fn cost_matrix(ph: &PhForm) -> DMatrix<f64> {
    ph.cost_matrix()
}

/// Residual blocks of the objective; each weighted term is `w_i ‖res_i‖²`.
#[derive(Debug, Clone)]
pub struct Residuals {
    /// `(J - R) Q - A`
    pub a: DMatrix<f64>,
    /// `F - P - B`
    pub b: DMatrix<f64>,
    /// `(F + P)ᵀ Q - C`
    pub c: DMatrix<f64>,
    /// `S - (D + Dᵀ)/2`
    pub d: DMatrix<f64>,
    /// `Z Q⁻¹ - Eᵀ` (descriptor mode)
    pub e: Option<DMatrix<f64>>,
    q_inv: Option<DMatrix<f64>>,
}

impl Residuals {
    pub fn new(ph: &PhForm, target: &LtiSystem) -> Result<Self> {
        if ph.state_dim() != target.n() || ph.input_dim() != target.m() {
            return Err(Error::Dimension(format!(
                "PH form is ({}, {}), target is ({}, {})",
                ph.state_dim(),
                ph.input_dim(),
                target.n(),
                target.m()
            )));
        }
        let fp = &ph.f + &ph.p;
        let a = (&ph.j - &ph.r) * &ph.q - &target.a;
        let b = &ph.f - &ph.p - &target.b;
        let c = fp.transpose() * &ph.q - &target.c;
        let d = &ph.s - linalg::sym(&target.d);
        let (e, q_inv) = match &ph.z {
            None => (None, None),
            Some(z) => {
                let q_inv = checked_inverse(&ph.q)?;
                (Some(z * &q_inv - target.e.transpose()), Some(q_inv))
            }
        };
        Ok(Self { a, b, c, d, e, q_inv })
    }

    /// Unweighted squared norms of the A, B, C, D, E residuals.
    pub fn terms(&self) -> [f64; 5] {
        [
            frob2(&self.a),
            frob2(&self.b),
            frob2(&self.c),
            frob2(&self.d),
            self.e.as_ref().map_or(0.0, frob2),
        ]
    }

    pub fn weighted(&self, w: &Weights) -> f64 {
        self.terms().iter().zip(w.0).map(|(t, wi)| t * wi).sum()
    }
}

/// Weighted objective
/// `w1‖A-(J-R)Q‖² + w2‖B-(F-P)‖² + w3‖C-(F+P)ᵀQ‖² + w4‖(D+Dᵀ)/2-S‖²`
/// plus `w5‖Eᵀ-ZQ⁻¹‖²` in descriptor mode. N does not enter: its optimal
/// value `(D-Dᵀ)/2` is attained independently of the other blocks.
pub fn objective(ph: &PhForm, target: &LtiSystem, w: &Weights) -> Result<f64> {
    let (n, m) = (ph.state_dim(), ph.input_dim());
    if n != target.n() || m != target.m() {
        return Residuals::new(ph, target).map(|r| r.weighted(w));
    }
    let [w1, w2, w3, w4, w5] = w.0;
    let (j, r, q, f, p) = (&ph.j, &ph.r, &ph.q, &ph.f, &ph.p);
    let mut ta = 0.0;
    let mut tc = 0.0;
    for col in 0..n {
        for i in 0..n {
            let mut acc = -target.a[(i, col)];
            for k in 0..n {
                acc += (j[(i, k)] - r[(i, k)]) * q[(k, col)];
            }
            ta += acc * acc;
        }
        for i in 0..m {
            let mut acc = -target.c[(i, col)];
            for k in 0..n {
                acc += (f[(k, i)] + p[(k, i)]) * q[(k, col)];
            }
            tc += acc * acc;
        }
    }
    let mut tb = 0.0;
    for (idx, bv) in target.b.iter().enumerate() {
        let v = f[idx] - p[idx] - bv;
        tb += v * v;
    }
    let mut td = 0.0;
    for col in 0..m {
        for i in 0..m {
            let v = ph.s[(i, col)] - 0.5 * (target.d[(i, col)] + target.d[(col, i)]);
            td += v * v;
        }
    }
    let mut total = w1 * ta + w2 * tb + w3 * tc + w4 * td;
    if let Some(z) = &ph.z {
        let q_inv = checked_inverse(q)?;
        let mut te = 0.0;
        for col in 0..n {
            for i in 0..n {
                let mut acc = -target.e[(col, i)];
                for k in 0..n {
                    acc += z[(i, k)] * q_inv[(k, col)];
                }
                te += acc * acc;
            }
        }
        total += w5 * te;
    }
    Ok(total)
}

/// Exact gradient of [`objective`] with respect to every block, each block
/// treated as an unconstrained matrix. The N block of the result is zero.
pub fn gradient(ph: &PhForm, target: &LtiSystem, w: &Weights) -> Result<PhForm> {
    let res = Residuals::new(ph, target)?;
    Ok(gradient_from(ph, &res, w))
}

fn gradient_from(ph: &PhForm, res: &Residuals, w: &Weights) -> PhForm {
    let [w1, w2, w3, w4, w5] = w.0;
    let ra_qt = &res.a * ph.q.transpose() * (2.0 * w1);
    let q_rct = &ph.q * res.c.transpose() * (2.0 * w3);
    let rb = &res.b * (2.0 * w2);

    let mut gq = (&ph.j - &ph.r).transpose() * &res.a * (2.0 * w1)
        + (&ph.f + &ph.p) * &res.c * (2.0 * w3);

    let gz = match (&ph.z, &res.e, &res.q_inv) {
        (Some(z), Some(re), Some(q_inv)) => {
            let q_inv_t = q_inv.transpose();
            // d/dQ ‖Z Q⁻¹ - Eᵀ‖² = -2 Q⁻ᵀ Zᵀ (Z Q⁻¹ - Eᵀ) Q⁻ᵀ
            gq -= &q_inv_t * z.transpose() * re * &q_inv_t * (2.0 * w5);
            Some(re * &q_inv_t * (2.0 * w5))
        }
        _ => None,
    };

    PhForm {
        j: ra_qt.clone(),
        r: -ra_qt,
        q: gq,
        f: &rb + &q_rct,
        p: -rb + q_rct,
        s: &res.d * (2.0 * w4),
        n: DMatrix::zeros(ph.input_dim(), ph.input_dim()),
        z: gz,
    }
}

/// Objective and gradient sharing one residual evaluation.
pub fn objective_and_gradient(
    ph: &PhForm,
    target: &LtiSystem,
    w: &Weights,
) -> Result<(f64, PhForm)> {
    let res = Residuals::new(ph, target)?;
    Ok((res.weighted(w), gradient_from(ph, &res, w)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::block2x2;
    use nalgebra::dmatrix;

    fn identity_case() -> PhForm {
        let mut ph = PhForm::zeros(3, 2, Mode::Standard);
        ph.r = DMatrix::identity(3, 3);
        ph.q = DMatrix::identity(3, 3);
        ph.s = DMatrix::identity(2, 2);
        ph
    }

    #[test]
    fn assemble_identity_case() {
        let sys = assemble(&identity_case()).unwrap();
        assert_eq!(sys.e, DMatrix::identity(3, 3));
        assert_eq!(sys.a, -DMatrix::identity(3, 3));
        assert_eq!(sys.b, DMatrix::zeros(3, 2));
        assert_eq!(sys.c, DMatrix::zeros(2, 3));
        assert_eq!(sys.d, DMatrix::identity(2, 2));
    }

    #[test]
    fn assemble_msd_blocks() {
        let p = 2;
        let i = DMatrix::<f64>::identity(p, p);
        let o = DMatrix::<f64>::zeros(p, p);
        let w = dmatrix![2.0, 0.5; 0.5, 1.0];
        let h = dmatrix![3.0, -1.0; -1.0, 4.0];
        let mut ph = PhForm::zeros(2 * p, 1, Mode::Standard);
        ph.j = block2x2(&o, &i, &(-&i), &o);
        ph.r = block2x2(&w, &o, &o, &o);
        ph.q = block2x2(&i, &o, &o, &h);
        let sys = assemble(&ph).unwrap();
        // block product by hand: (J - R) Q = [-W  H; -I  0]
        let expected = block2x2(&(-&w), &h, &(-&i), &o);
        assert_eq!(sys.a, expected);
    }

    #[test]
    fn assemble_descriptor_cancels() {
        let mut ph = identity_case();
        ph.q = DMatrix::identity(3, 3) * 2.0;
        ph.z = Some(DMatrix::identity(3, 3) * 2.0);
        let sys = assemble(&ph).unwrap();
        assert_eq!(sys.e, DMatrix::identity(3, 3));
    }

    #[test]
    fn assemble_singular_q_fails() {
        let mut ph = identity_case();
        ph.q[(2, 2)] = 0.0;
        ph.z = Some(DMatrix::identity(3, 3));
        assert!(matches!(assemble(&ph), Err(Error::SingularQ { .. })));
    }

    #[test]
    fn exact_fit_has_zero_objective_and_gradient() {
        let mut ph = identity_case();
        ph.j[(0, 1)] = 0.7;
        ph.j[(1, 0)] = -0.7;
        ph.f[(1, 0)] = 0.3;
        ph.n[(0, 1)] = 0.2;
        ph.n[(1, 0)] = -0.2;
        let target = assemble(&ph).unwrap();
        let w = Weights::default();
        assert_eq!(objective(&ph, &target, &w).unwrap(), 0.0);
        let g = gradient(&ph, &target, &w).unwrap();
        assert_eq!(g.norm2(), 0.0);
    }

    #[test]
    fn doubling_weights_doubles_objective() {
        let ph = identity_case();
        let target = LtiSystem::standard(
            DMatrix::from_element(3, 3, 0.3),
            DMatrix::from_element(3, 2, 1.0),
            DMatrix::from_element(2, 3, -1.0),
            dmatrix![0.1, 2.0; 0.0, -1.0],
        )
        .unwrap();
        let w = Weights([0.3, 1.2, 0.7, 2.0, 1.0]);
        let f1 = objective(&ph, &target, &w).unwrap();
        let f2 = objective(&ph, &target, &w.scaled(2.0)).unwrap();
        assert!((f2 - 2.0 * f1).abs() <= 1e-14 * f2);
    }

    #[test]
    fn cost_matrix_cases() {
        let ph = identity_case();
        assert_eq!(cost_matrix(&ph), DMatrix::identity(5, 5));
        let z = PhForm::zeros(3, 2, Mode::Standard);
        let k = cost_matrix(&z);
        assert_eq!(k, DMatrix::zeros(5, 5));
        assert_eq!(linalg::lambda_min(&k).unwrap(), 0.0);
    }

    #[test]
    fn objective_agrees_with_residual_blocks() {
        let mut ph = identity_case();
        ph.j[(0, 2)] = 0.4;
        ph.j[(2, 0)] = -0.4;
        ph.f = dmatrix![0.3, -1.0; 0.2, 0.5; 1.5, 0.0];
        ph.p[(1, 1)] = 0.25;
        ph.q[(0, 1)] = 0.1;
        ph.q[(1, 0)] = 0.1;
        ph.z = Some(dmatrix![2.0, 0.1, 0.0; 0.1, 1.0, 0.3; 0.0, 0.3, 1.5]);
        let target = LtiSystem::new(
            DMatrix::from_fn(3, 3, |i, j| (i * 3 + j) as f64 * 0.1),
            DMatrix::from_element(3, 3, 0.3),
            DMatrix::from_fn(3, 2, |i, j| i as f64 - j as f64),
            DMatrix::from_element(2, 3, -1.0),
            dmatrix![0.1, 2.0; 0.0, -1.0],
        )
        .unwrap();
        let w = Weights([0.3, 1.2, 0.7, 2.0, 1.1]);
        let direct = objective(&ph, &target, &w).unwrap();
        let blocks = Residuals::new(&ph, &target).unwrap().weighted(&w);
        assert!((direct - blocks).abs() <= 1e-13 * blocks);
    }

    #[test]
    fn weights_validation() {
        assert!(Weights::from_slice(&[1.0, 1.0, 1.0]).is_err());
        assert!(Weights::from_slice(&[1.0, -1.0, 1.0, 1.0]).is_err());
        assert_eq!(Weights::from_slice(&[1.75, 1.75, 0.25, 0.25]).unwrap().0[4], 1.0);
    }

    #[test]
    fn system_dimension_checks() {
        let r = LtiSystem::new(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 1),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(1, 1),
        );
        assert!(matches!(r, Err(Error::Dimension(_))));
        let mut a = DMatrix::identity(2, 2);
        a[(0, 0)] = f64::NAN;
        let r = LtiSystem::new(
            DMatrix::identity(2, 2),
            a,
            DMatrix::zeros(2, 1),
            DMatrix::zeros(1, 2),
            DMatrix::zeros(1, 1),
        );
        assert_eq!(r, Err(Error::NonFinite("A")));
    }
}
