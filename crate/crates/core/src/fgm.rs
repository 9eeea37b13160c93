//! Fast projected gradient method with adaptive step length and momentum
//! restart, and its application to the nearest-PH-system problem.

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{self, LtiSystem, Mode, PhForm, Weights};
use crate::projections::{project_ph, Bounds};

/// Step-length reduction factor inside the backtracking loop.
pub const STEP_SHRINK: f64 = 2.0 / 3.0;
/// Step-length growth factor applied at the end of every outer iteration.
pub const STEP_GROW: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgmOptions {
    /// Initial momentum parameter, in (0, 1).
    pub alpha1: f64,
    /// Smallest admissible step, relative to the initial step.
    pub min_step_factor: f64,
    pub max_iters: usize,
    pub max_seconds: f64,
    /// Stop when the objective decreased by less than this fraction over the
    /// last `window` iterations.
    pub tol_rel_decrease: f64,
    pub window: usize,
}

impl Default for FgmOptions {
    fn default() -> Self {
        Self {
            alpha1: 0.5,
            min_step_factor: 1e-12,
            max_iters: 1_000_000,
            max_seconds: 60.0,
            tol_rel_decrease: 1e-10,
            window: 100,
        }
    }
}

impl FgmOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 > 0.0 && self.alpha1 < 1.0) {
            return Err(Error::PreconditionViolated(format!(
                "alpha1 must lie in (0, 1), got {}",
                self.alpha1
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::PreconditionViolated("max_iters must be at least 1".into()));
        }
        if !(self.min_step_factor > 0.0 && self.min_step_factor < 1.0) {
            return Err(Error::PreconditionViolated("min_step_factor must lie in (0, 1)".into()));
        }
        if self.window == 0 {
            return Err(Error::PreconditionViolated("window must be at least 1".into()));
        }
        Ok(())
    }
}

/// One outer iteration. Iteration 0 is the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub seconds: f64,
    pub objective: f64,
    pub step: f64,
    pub restart: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    MaxSeconds,
    RelativeDecrease,
    /// No decrease even along a plain gradient step of minimal length.
    Stationary,
    ZeroObjective,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FgmTrace {
    pub records: Vec<IterRecord>,
    pub stop: StopReason,
}

impl FgmTrace {
    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn restarts(&self) -> usize {
        self.records.iter().filter(|r| r.restart).count()
    }

    /// True iff the recorded objective never increases.
    pub fn is_monotone(&self) -> bool {
        self.records.windows(2).all(|w| w[1].objective <= w[0].objective)
    }

    /// CSV with header `iteration,seconds,objective,step,restart`.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        for r in &self.records {
            wtr.serialize(r).map_err(std::io::Error::other)?;
        }
        wtr.flush()
    }
}

/// Vector-space operations needed by [`fgm_minimize`].
pub trait Iterate: Clone {
    /// `self + alpha * other`
    fn axpy(&self, alpha: f64, other: &Self) -> Self;
}

impl Iterate for f64 {
    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        self + alpha * other
    }
}

impl Iterate for DVector<f64> {
    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        self + other * alpha
    }
}

impl Iterate for DMatrix<f64> {
    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        self + other * alpha
    }
}

impl Iterate for PhForm {
    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        PhForm::axpy(self, alpha, other)
    }
}

/// Momentum recurrence: returns `(α_{k+1}, β_k)` from `α_k`.
pub fn momentum_step(alpha: f64) -> (f64, f64) {
    let a2 = alpha * alpha;
    let next = 0.5 * ((a2 * a2 + 4.0 * a2).sqrt() - a2);
    let beta = alpha * (1.0 - alpha) / (a2 + next);
    (next, beta)
}

/// Minimize `f` over a set given by its projection, starting from a feasible
/// `x0` with initial step `step0`.
///
/// `f` may return a non-finite value (or an error) for points outside its
/// domain; such trial points are treated as failing to decrease the objective.
/// The returned point is the best iterate seen.
pub fn fgm_minimize<X, F, G, P>(
    mut f: F,
    mut grad: G,
    mut project: P,
    x0: X,
    step0: f64,
    opts: &FgmOptions,
) -> Result<(X, FgmTrace)>
where
    X: Iterate,
    F: FnMut(&X) -> Result<f64>,
    G: FnMut(&X) -> Result<X>,
    P: FnMut(&X) -> Result<X>,
{
    opts.validate()?;
    if !(step0.is_finite() && step0 > 0.0) {
        return Err(Error::PreconditionViolated(format!("initial step must be positive, got {step0}")));
    }
    let start = Instant::now();
    let mut eval = |x: &X| match f(x) {
        Ok(v) if v.is_finite() => v,
        _ => f64::INFINITY,
    };

    let mut x = x0;
    let mut fx = eval(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut y = x.clone();
    let mut y_is_x = true;
    let mut gamma = step0;
    let gamma_min = opts.min_step_factor * step0;
    let mut last_good: Option<f64> = None;
    let mut alpha = opts.alpha1;

    let mut records = vec![IterRecord { iteration: 0, seconds: 0.0, objective: fx, step: gamma, restart: false }];
    let mut stop = StopReason::MaxIters;
    if fx == 0.0 {
        return Ok((x, FgmTrace { records, stop: StopReason::ZeroObjective }));
    }

    for k in 1..=opts.max_iters {
        if start.elapsed().as_secs_f64() >= opts.max_seconds {
            stop = StopReason::MaxSeconds;
            break;
        }
        let x_hat = x.clone();
        let f_hat = fx;

        let g = grad(&y).ok();
        let mut restart = false;
        let mut stationary = false;
        match g {
            None => {
                // gradient undefined at the extrapolated point: fall back to x̂
                if y_is_x {
                    return Err(Error::NonFiniteObjective);
                }
                restart = true;
                gamma = last_good.unwrap_or(step0);
            }
            Some(g) => {
                let mut cand = project(&y.axpy(-gamma, &g))?;
                let mut fc = eval(&cand);
                while !(fc <= f_hat) && gamma >= gamma_min {
                    gamma *= STEP_SHRINK;
                    cand = project(&y.axpy(-gamma, &g))?;
                    fc = eval(&cand);
                }
                if gamma < gamma_min {
                    restart = true;
                    if fc <= f_hat {
                        x = cand;
                        fx = fc;
                    } else if y_is_x {
                        stationary = true;
                    }
                    gamma = last_good.unwrap_or(step0);
                } else {
                    x = cand;
                    fx = fc;
                    last_good = Some(gamma);
                    let (next, beta) = momentum_step(alpha);
                    y = x.axpy(beta, &x.axpy(-1.0, &x_hat));
                    y_is_x = beta == 0.0;
                    alpha = next;
                }
            }
        }
        if restart {
            y = x.clone();
            y_is_x = true;
            alpha = opts.alpha1;
        }
        gamma *= STEP_GROW;

        records.push(IterRecord {
            iteration: k,
            seconds: start.elapsed().as_secs_f64(),
            objective: fx,
            step: gamma,
            restart,
        });

        if stationary {
            stop = StopReason::Stationary;
            break;
        }
        if fx == 0.0 {
            stop = StopReason::ZeroObjective;
            break;
        }
        if k >= opts.window {
            let past = records[k - opts.window].objective;
            if past - fx <= opts.tol_rel_decrease * past {
                stop = StopReason::RelativeDecrease;
                break;
            }
        }
    }
    // accepted iterates never increase f, so the last one is the best
    Ok((x, FgmTrace { records, stop }))
}

/// `1/L` with `L = ‖Q‖₂²` (standard) or `max(‖Q‖₂², ‖Q⁻¹‖₂²)` (descriptor).
pub fn initial_step(ph: &PhForm) -> Result<f64> {
    let q_norm = linalg::spectral_norm(&ph.q);
    let mut lip = q_norm * q_norm;
    if ph.mode() == Mode::Descriptor {
        let inv_norm = linalg::spectral_norm(&model::checked_inverse(&ph.q)?);
        lip = lip.max(inv_norm * inv_norm);
    }
    if lip == 0.0 {
        lip = 1.0;
    }
    Ok(1.0 / lip)
}

/// Output of [`solve_nearest`].
#[derive(Debug, Clone)]
pub struct NearestSolution {
    pub ph: PhForm,
    pub system: LtiSystem,
    pub objective: f64,
    pub trace: FgmTrace,
}

/// Nearest PH system to `target`, starting from `init`. The mode (standard or
/// descriptor) is taken from `init`.
pub fn solve_nearest(
    target: &LtiSystem,
    init: &PhForm,
    w: &Weights,
    bounds: &Bounds,
    opts: &FgmOptions,
) -> Result<NearestSolution> {
    if init.mode() == Mode::Standard && !target.is_standard() {
        return Err(Error::PreconditionViolated(
            "standard mode requires a target with E = I".into(),
        ));
    }
    let mut x0 = project_ph(init, bounds)?;
    x0.n = linalg::skew(&target.d);
    let step0 = initial_step(&x0)?;

    let (best, trace) = fgm_minimize(
        |x: &PhForm| model::objective(x, target, w),
        |y: &PhForm| {
            let g = model::gradient(y, target, w)?;
            if g.is_finite() {
                Ok(g)
            } else {
                Err(Error::NonFiniteObjective)
            }
        },
        |x: &PhForm| project_ph(x, bounds),
        x0,
        step0,
        opts,
    )?;
    let system = model::assemble(&best)?;
    let objective = model::objective(&best, target, w)?;
    Ok(NearestSolution { ph: best, system, objective, trace })
}
