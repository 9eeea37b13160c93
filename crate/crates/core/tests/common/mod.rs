//! Property checks shared by the proptest suite and the acceptance run.
#![allow(dead_code)]

use nalgebra::DMatrix;
use passive_ph::analysis::{self, ReportOptions};
use passive_ph::fgm::FgmOptions;
use passive_ph::init::{self, random_ph};
use passive_ph::linalg::{frob2, lambda_min, sym};
use passive_ph::model::{self, assemble, LtiSystem, Mode, PhForm, Weights};
use passive_ph::projections::{project_ph, project_psd, project_skew, Bounds};
use passive_ph::solve_nearest;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn random_system(rng: &mut ChaCha8Rng, n: usize, m: usize, mode: Mode) -> LtiSystem {
    let e = match mode {
        Mode::Standard => DMatrix::identity(n, n),
        Mode::Descriptor => gaussian(rng, n, n),
    };
    LtiSystem::new(e, gaussian(rng, n, n), gaussian(rng, n, m), gaussian(rng, m, n), gaussian(rng, m, m)).unwrap()
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Random PH form with K and Z (descriptor) shifted to be positive definite.
pub fn strict_ph(n: usize, m: usize, mode: Mode, seed: u64) -> PhForm {
    let mut ph = random_ph(n, m, mode, seed, 20.0).unwrap();
    let k = ph.cost_matrix() + DMatrix::identity(n + m, n + m) * 0.5;
    ph.set_cost_matrix(&k);
    if let Some(z) = &mut ph.z {
        *z += DMatrix::identity(n, n) * 0.5;
    }
    ph
}

pub fn blocks(ph: &PhForm) -> Vec<&DMatrix<f64>> {
    let mut out = vec![&ph.j, &ph.r, &ph.q, &ph.f, &ph.p, &ph.s, &ph.n];
    if let Some(z) = ph.z.as_ref() {
        out.push(z);
    }
    out
}

pub fn blocks_mut(ph: &mut PhForm) -> Vec<&mut DMatrix<f64>> {
    let mut out = vec![&mut ph.j, &mut ph.r, &mut ph.q, &mut ph.f, &mut ph.p, &mut ph.s, &mut ph.n];
    if let Some(z) = ph.z.as_mut() {
        out.push(z);
    }
    out
}

pub fn psd_projection_idempotent(seed: u64, n: usize, lb: f64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n, n);
    let p = project_psd(&x, lb).unwrap();
    let again = project_psd(&p, lb).unwrap();
    ensure!((&again - &p).norm() <= 1e-12 * (1.0 + p.norm()), "projection moved a feasible point");
    let lmin = lambda_min(&p).unwrap();
    ensure!(lmin >= lb - 1e-10, "λ_min {lmin} below bound {lb}");
    Ok(())
}

/// `P = Π(X)` iff `P ⪰ 0`, `P - sym(X) ⪰ 0` and `⟨P - sym(X), P⟩ = 0`.
pub fn psd_projection_optimal(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n, n);
    let p = project_psd(&x, 0.0).unwrap();
    let gap = &p - sym(&x);
    let scale = 1.0 + x.norm();
    ensure!(lambda_min(&gap).unwrap() >= -1e-10 * scale, "P - sym(X) not PSD");
    ensure!(inner(&gap, &p).abs() <= 1e-10 * scale * scale, "complementarity violated");
    let best = (&x - &p).norm();
    for _ in 0..20 {
        let g = gaussian(&mut rng, n, n);
        let cand = &g * g.transpose() * 0.1;
        ensure!((&x - cand).norm() >= best - 1e-12, "a random PSD matrix is closer");
    }
    Ok(())
}

pub fn skew_projection_orthogonal(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n, n);
    let s = project_skew(&x);
    ensure!(project_skew(&s) == s, "skew projection not idempotent");
    let g = gaussian(&mut rng, n, n);
    let other = &g - g.transpose();
    ensure!(
        inner(&(&x - &s), &other).abs() <= 1e-12 * (1.0 + x.norm() * other.norm()),
        "residual not orthogonal to skew matrices"
    );
    Ok(())
}

pub fn sym_skew_decomposition(seed: u64, n: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n, n);
    let (s, k) = (sym(&x), project_skew(&x));
    let x2 = frob2(&x);
    ensure!((&s + &k - &x).norm() <= 1e-14 * (1.0 + x.norm()), "sym + skew != X");
    ensure!((frob2(&s) + frob2(&k) - x2).abs() <= 1e-12 * (1.0 + x2), "norms do not add up");
    ensure!(inner(&s, &k).abs() <= 1e-12 * (1.0 + x2), "parts not orthogonal");
    Ok(())
}

pub fn ph_projection_feasible(seed: u64, n: usize, m: usize, mode: Mode) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ph = PhForm::zeros(n, m, mode);
    for b in blocks_mut(&mut ph) {
        let (r, c) = b.shape();
        *b = gaussian(&mut rng, r, c);
    }
    let bounds = Bounds { delta_k: 0.01, nu_z: 0.02 };
    let p = project_ph(&ph, &bounds).unwrap();
    ensure!((&p.j + p.j.transpose()).norm() == 0.0, "J not skew");
    ensure!(lambda_min(&p.cost_matrix()).unwrap() >= 0.01 - 1e-10, "K below bound");
    let constrained = p.z.as_ref().unwrap_or(&p.q);
    ensure!(lambda_min(constrained).unwrap() >= 0.02 - 1e-10, "Z below bound");
    ensure!(p.f == ph.f, "F changed");
    let twice = project_ph(&p, &bounds).unwrap();
    for (a, b) in blocks(&twice).into_iter().zip(blocks(&p)) {
        ensure!((a - b).norm() <= 1e-12 * (1.0 + b.norm()), "projection not idempotent");
    }
    Ok(())
}

pub fn optimal_f_stationary(seed: u64, n: usize, m: usize) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ph = random_ph(n, m, Mode::Standard, seed, 100.0).unwrap();
    let target = random_system(&mut rng, n, m, Mode::Standard);
    ph.f = init::optimal_f(&ph.q, &ph.p, &target.b, &target.c).unwrap();
    let g = model::gradient(&ph, &target, &Weights::default()).unwrap();
    ensure!(g.f.norm() <= 1e-10, "gradient norm in F is {:e}", g.f.norm());
    Ok(())
}

/// Relative error of the analytic gradient against entrywise central
/// differences over every block.
pub fn gradient_fd_error(n: usize, m: usize, mode: Mode, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let ph = random_ph(n, m, mode, seed, 10.0).unwrap();
    let target = random_system(&mut rng, n, m, mode);
    let w = Weights([0.5 + (seed % 3) as f64, 1.0, 0.25, 2.0, 0.75]);
    let g = model::gradient(&ph, &target, &w).unwrap();
    let h = 1e-6;
    let (mut err2, mut norm2) = (0.0, 0.0);
    let nblocks = blocks(&ph).len();
    for bi in 0..nblocks {
        let len = blocks(&ph)[bi].len();
        for idx in 0..len {
            let mut plus = ph.clone();
            blocks_mut(&mut plus)[bi][idx] += h;
            let mut minus = ph.clone();
            blocks_mut(&mut minus)[bi][idx] -= h;
            let fp = model::objective(&plus, &target, &w).unwrap();
            let fm = model::objective(&minus, &target, &w).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let an = blocks(&g)[bi][idx];
            err2 += (fd - an).powi(2);
            norm2 += an * an;
        }
    }
    (err2 / norm2.max(f64::MIN_POSITIVE)).sqrt()
}

pub fn fgm_monotone(seed: u64, n: usize, m: usize, mode: Mode) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = random_system(&mut rng, n, m, mode);
    let x0 = init::init_standard(&target, mode).unwrap();
    let opts = FgmOptions { max_iters: 400, max_seconds: 10.0, ..Default::default() };
    let sol = solve_nearest(&target, &x0, &Weights::default(), &Bounds::default(), &opts).unwrap();
    ensure!(sol.trace.is_monotone(), "objective increased along the trace");
    ensure!(sol.objective <= sol.trace.records[0].objective, "final above initial");
    ensure!(
        (sol.objective - sol.trace.final_objective()).abs() <= 1e-9 * (1.0 + sol.objective),
        "returned point is not the last accepted iterate"
    );
    Ok(())
}

pub fn ph_form_satisfies_kyp(seed: u64, n: usize, m: usize, mode: Mode) -> Check {
    let ph = random_ph(n, m, mode, seed, 20.0).unwrap();
    let sys = assemble(&ph).unwrap();
    let res = analysis::lmi_residual(&sys, &ph.q).unwrap();
    let scale = analysis::lmi_block(&sys, &ph.q).norm().max(1.0);
    ensure!(res.lambda_max_block <= 1e-10 * scale, "{res:?}");
    ensure!(res.lambda_min_etx >= -1e-10 * scale, "{res:?}");
    ensure!(res.asym_norm <= 1e-10 * scale, "{res:?}");
    Ok(())
}

pub fn strict_ph_certified(seed: u64, n: usize, m: usize, mode: Mode) -> Check {
    let ph = strict_ph(n, m, mode, seed);
    let sys = assemble(&ph).unwrap();
    let opts = ReportOptions { grid_points: 60, lmi_x: Some(ph.q.clone()), ..Default::default() };
    let report = analysis::passivity_report(&sys, &opts);
    ensure!(report.admissible == Some(true), "not admissible: {:?}", report.errors);
    ensure!(report.lmi.as_ref().is_some_and(|l| l.certified_strict), "strict LMIs not certified");
    ensure!(report.grid_positive(), "grid not positive: {}", report.grid_evidence);
    Ok(())
}

/// A strict PH system has δ* = 0 and the LMI solution rebuilds it exactly.
pub fn lmi_round_trip(seed: u64, n: usize, m: usize) -> Check {
    let ph = strict_ph(n, m, Mode::Descriptor, seed);
    let sys = assemble(&ph).unwrap();
    let lmi = init::solve_delta_lmi(&sys).map_err(|e| e.to_string())?;
    ensure!(lmi.delta_star <= 1e-6, "δ* = {:e}", lmi.delta_star);
    let rebuilt = init::init_lmi_formula(&sys, &lmi, Mode::Descriptor).map_err(|e| e.to_string())?;
    let back = assemble(&rebuilt).unwrap();
    let rel = (sys.distance2(&back) / sys.norm2()).sqrt();
    ensure!(rel <= 1e-5, "relative reconstruction error {rel:e}");
    Ok(())
}
