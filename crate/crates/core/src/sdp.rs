//! Conic (semidefinite) solver interface.
//!
//! Everything the crate needs from a conic solver goes through [`solve_conic`]:
//!
//! ```text
//! minimize    ½ xᵀ P x + qᵀ x
//! subject to  b - A x ∈ K₁ × … × K_p
//! ```
//!
//! where each `Kᵢ` is a zero cone, a nonnegative orthant or a PSD cone. PSD
//! slack blocks use the scaled upper-triangular vectorization [`svec`].
//! The current backend is Clarabel.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero(usize),
    Nonneg(usize),
    /// PSD cone of `d x d` matrices, `d (d + 1) / 2` rows.
    Psd(usize),
}

impl Cone {
    pub fn rows(&self) -> usize {
        match *self {
            Cone::Zero(k) | Cone::Nonneg(k) => k,
            Cone::Psd(d) => d * (d + 1) / 2,
        }
    }
}

/// Problem data in triplet form. `p` holds upper-triangular entries only.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub num_vars: usize,
    pub p: Vec<(usize, usize, f64)>,
    pub q: Vec<f64>,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveQuality {
    Optimal,
    /// Converged to the solver's reduced tolerances only.
    Inaccurate,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub quality: SolveQuality,
    pub iterations: u32,
}

/// Position of entry `(i, j)`, `i <= j`, in [`svec`] order.
pub fn svec_index(i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    j * (j + 1) / 2 + i
}

/// Scaled vectorization of the upper triangle, column by column, with
/// off-diagonal entries multiplied by √2 (so that `⟨svec X, svec Y⟩ = ⟨X, Y⟩`).
pub fn svec(x: &DMatrix<f64>) -> Vec<f64> {
    let d = x.nrows();
    let mut out = vec![0.0; d * (d + 1) / 2];
    for j in 0..d {
        for i in 0..=j {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            out[svec_index(i, j)] = if i == j { v } else { v * std::f64::consts::SQRT_2 };
        }
    }
    out
}

impl ConicProblem {
    pub fn new(num_vars: usize) -> Self {
        Self { num_vars, q: vec![0.0; num_vars], ..Default::default() }
    }

    fn next_row(&self) -> usize {
        self.b.len()
    }

    /// Add the linear matrix inequality `F₀ + Σ xᵥ Fᵥ ⪰ 0` (symmetric parts).
    pub fn push_lmi(&mut self, constant: &DMatrix<f64>, terms: &[(usize, DMatrix<f64>)]) {
        let row0 = self.next_row();
        let d = constant.nrows();
        self.b.extend(svec(constant));
        for (var, coef) in terms {
            for (r, v) in svec(coef).into_iter().enumerate() {
                if v != 0.0 {
                    self.a.push((row0 + r, *var, -v));
                }
            }
        }
        self.cones.push(Cone::Psd(d));
    }

    /// Add equality rows `Σ coefs · x = rhs`.
    pub fn push_equalities(&mut self, rows: &[(Vec<(usize, f64)>, f64)]) {
        if rows.is_empty() {
            return;
        }
        let row0 = self.next_row();
        for (k, (coefs, rhs)) in rows.iter().enumerate() {
            for &(var, v) in coefs {
                if v != 0.0 {
                    self.a.push((row0 + k, var, v));
                }
            }
            self.b.push(*rhs);
        }
        self.cones.push(Cone::Zero(rows.len()));
    }

    /// Add `x_var >= 0`.
    pub fn push_nonneg(&mut self, var: usize) {
        let row = self.next_row();
        self.a.push((row, var, -1.0));
        self.b.push(0.0);
        self.cones.push(Cone::Nonneg(1));
    }
}

/// Solve a conic problem to (absolute and relative) tolerance `tol`.
pub fn solve_conic(problem: &ConicProblem, tol: f64) -> Result<ConicSolution> {
    let n = problem.num_vars;
    let m = problem.b.len();
    let rows: usize = problem.cones.iter().map(Cone::rows).sum();
    if rows != m || problem.q.len() != n {
        return Err(Error::Dimension(format!(
            "conic problem has {m} rows, cones expect {rows}; {} costs for {n} variables",
            problem.q.len()
        )));
    }
    let (pi, pj, pv) = split(&problem.p);
    if pi.iter().zip(&pj).any(|(i, j)| i > j) {
        return Err(Error::Dimension("P must be given by its upper triangle".into()));
    }
    let p = CscMatrix::new_from_triplets(n, n, pi, pj, pv);
    let (ai, aj, av) = split(&problem.a);
    let a = CscMatrix::new_from_triplets(m, n, ai, aj, av);
    let cones: Vec<SupportedConeT<f64>> = problem
        .cones
        .iter()
        .map(|c| match *c {
            Cone::Zero(k) => SupportedConeT::ZeroConeT(k),
            Cone::Nonneg(k) => SupportedConeT::NonnegativeConeT(k),
            Cone::Psd(d) => SupportedConeT::PSDTriangleConeT(d),
        })
        .collect();
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .tol_gap_abs(tol)
        .tol_gap_rel(tol)
        .tol_feas(tol)
        .max_iter(500)
        .build()
        .map_err(|e| Error::SolverFailed(e.to_string()))?;
    let mut solver = DefaultSolver::new(&p, &problem.q, &a, &problem.b, &cones, settings)
        .map_err(|e| Error::SolverFailed(format!("{e:?}")))?;
    solver.solve();
    let sol = &solver.solution;
    let quality = match sol.status {
        SolverStatus::Solved => SolveQuality::Optimal,
        SolverStatus::AlmostSolved => SolveQuality::Inaccurate,
        other => return Err(Error::SolverFailed(format!("status {other:?}"))),
    };
    if sol.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SolverFailed("non-finite primal solution".into()));
    }
    Ok(ConicSolution { x: sol.x.clone(), objective: sol.obj_val, quality, iterations: sol.iterations })
}

fn split(t: &[(usize, usize, f64)]) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
    let mut i = Vec::with_capacity(t.len());
    let mut j = Vec::with_capacity(t.len());
    let mut v = Vec::with_capacity(t.len());
    for &(r, c, x) in t {
        i.push(r);
        j.push(c);
        v.push(x);
    }
    (i, j, v)
}
