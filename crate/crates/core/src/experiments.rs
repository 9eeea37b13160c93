//! Test-system generators, perturbations and the benchmark harness.

use std::path::PathBuf;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::error::{Error, Result};
use crate::fgm::{solve_nearest, FgmOptions};
use crate::init::{self, DEFAULT_KAPPA};
use crate::linalg::{self, block_diag};
use crate::model::{assemble, LtiSystem, Mode, PhForm, Weights};
use crate::projections::Bounds;

/// Mass-spring-damper generator parameters; the state dimension is `2p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MsdParams {
    pub p: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(default = "default_spd_shift")]
    pub spd_shift: f64,
}

fn default_spd_shift() -> f64 {
    0.1
}

impl MsdParams {
    pub fn new(p: usize, m: usize, seed: u64) -> Self {
        Self { p, m, seed, spd_shift: default_spd_shift() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.m == 0 || !self.m.is_multiple_of(2) {
            return Err(Error::PreconditionViolated(format!(
                "MSD needs p >= 1 and an even m >= 2 (got p = {}, m = {})",
                self.p, self.m
            )));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn spd(rng: &mut ChaCha8Rng, p: usize, shift: f64) -> DMatrix<f64> {
    let g = gaussian(rng, p, p);
    &g * g.transpose() + DMatrix::identity(p, p) * shift
}

/// Mass-spring-damper system in PH form:
/// `E = diag(V, I)`, `J = [0 I; -I 0]`, `R = diag(W, 0)`, `Q = diag(I, H)`,
/// B uniform on [0, 1], `D = LLᵀ` with L of width m/2, `C = BᵀQ`.
/// The PH form is returned in descriptor mode (`Z = EᵀQ`).
pub fn msd_generate(params: &MsdParams) -> Result<(PhForm, LtiSystem)> {
    params.validate()?;
    let (p, m) = (params.p, params.m);
    let n = 2 * p;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let v = spd(&mut rng, p, params.spd_shift);
    let w = spd(&mut rng, p, params.spd_shift);
    let h = spd(&mut rng, p, params.spd_shift);
    let unif = Uniform::new(0.0, 1.0).expect("valid interval");
    let b = DMatrix::from_fn(n, m, |_, _| unif.sample(&mut rng));
    let l = gaussian(&mut rng, m, m / 2);

    let eye = DMatrix::identity(p, p);
    let zero = DMatrix::zeros(p, p);
    let mut ph = PhForm::zeros(n, m, Mode::Descriptor);
    ph.j = linalg::block2x2(&zero, &eye, &(-&eye), &zero);
    ph.r = block_diag(&w, &zero);
    ph.q = block_diag(&eye, &h);
    ph.f = b;
    ph.s = &l * l.transpose();
    let e = block_diag(&v, &eye);
    ph.z = Some(e.transpose() * &ph.q);
    let mut sys = assemble(&ph)?;
    // keep the exact E rather than (ZQ⁻¹)ᵀ
    sys.e = e;
    Ok((ph, sys))
}

/// The MSD system with R replaced by `R + diag(0, -εI)`.
pub fn msd_perturb(ph: &PhForm, sys: &LtiSystem, eps: f64) -> Result<LtiSystem> {
    if !(eps >= 0.0) {
        return Err(Error::PreconditionViolated("eps must be nonnegative".into()));
    }
    let n = ph.state_dim();
    let p = n / 2;
    let mut r = ph.r.clone();
    for i in p..n {
        r[(i, i)] -= eps;
    }
    let a = (&ph.j - r) * &ph.q;
    LtiSystem::new(sys.e.clone(), a, sys.b.clone(), sys.c.clone(), sys.d.clone())
}

/// Random PH system (descriptor mode, N = 0) in the style of the random
/// initialization, with Gaussian F.
pub fn random_pr_system(n: usize, m: usize, seed: u64) -> Result<(PhForm, LtiSystem)> {
    let ph = init::random_ph(n, m, Mode::Descriptor, seed, DEFAULT_KAPPA)?;
    let sys = assemble(&ph)?;
    Ok((ph, sys))
}

/// Zero the smallest singular value of X, then shift all singular values by
/// `-δ σ_max`, keeping the singular vectors.
pub fn sv_perturb(x: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let svd = x.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("requested U"), svd.v_t.expect("requested Vᵀ"));
    let mut s = svd.singular_values.clone();
    if let Some((imin, _)) = s.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)) {
        s[imin] = 0.0;
    }
    let smax = s.max();
    let shifted = s.map(|v| v - delta * smax);
    &u * DMatrix::from_diagonal(&shifted) * &vt
}

/// `‖Σ - Σ̃‖ / ‖Σ̃‖` over all five matrices.
pub fn relative_distance(orig: &LtiSystem, perturbed: &LtiSystem) -> f64 {
    (orig.distance2(perturbed) / perturbed.norm2()).sqrt()
}

fn perturb_rs(ph: &PhForm, sys: &LtiSystem, delta: f64) -> Result<LtiSystem> {
    let mut pert = ph.clone();
    pert.r = sv_perturb(&ph.r, delta);
    pert.s = sv_perturb(&ph.s, delta);
    let mut out = assemble(&pert)?;
    out.e = sys.e.clone();
    Ok(out)
}

/// Perturb R and S with [`sv_perturb`], bisecting δ until the relative
/// distance to the original system is `eps_rel` (to relative accuracy 1e-4).
pub fn perturb_to_distance(ph: &PhForm, sys: &LtiSystem, eps_rel: f64) -> Result<(LtiSystem, f64)> {
    if !(eps_rel > 0.0 && eps_rel < 1.0) {
        return Err(Error::PreconditionViolated("eps_rel must lie in (0, 1)".into()));
    }
    let dist = |delta: f64| -> Result<f64> { Ok(relative_distance(sys, &perturb_rs(ph, sys, delta)?)) };
    let floor = dist(0.0)?;
    if floor > eps_rel {
        return Err(Error::BisectionFailed(format!(
            "zeroing the smallest singular values alone moves the system by {floor:e} > {eps_rel}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut doublings = 0;
    while dist(hi)? < eps_rel {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::BisectionFailed(format!("no δ reaches relative distance {eps_rel}")));
        }
    }
    let tol = 1e-4 * eps_rel;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let d = dist(mid)?;
        if (d - eps_rel).abs() <= tol {
            return Ok((perturb_rs(ph, sys, mid)?, mid));
        }
        if d < eps_rel {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::BisectionFailed(format!("bracket [{lo}, {hi}] did not resolve {eps_rel}")))
}

/// Initialization strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Standard,
    LmiFormula,
    LmiSolve,
    Random,
    True,
}

impl InitKind {
    pub fn label(&self) -> &'static str {
        match self {
            InitKind::Standard => "standard",
            InitKind::LmiFormula => "lmi-formula",
            InitKind::LmiSolve => "lmi-solve",
            InitKind::Random => "random",
            InitKind::True => "true",
        }
    }
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(InitKind::Standard),
            "lmi-formula" => Ok(InitKind::LmiFormula),
            "lmi-solve" => Ok(InitKind::LmiSolve),
            "random" => Ok(InitKind::Random),
            "true" => Ok(InitKind::True),
            other => Err(Error::PreconditionViolated(format!("unknown initialization '{other}'"))),
        }
    }
}

/// Known ground truth for generated instances.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    /// MSD-style: `true` init substitutes `F = B, P = 0, S = D, N = 0`.
    Msd(PhForm),
    /// The unperturbed form itself is the `true` init.
    Exact(PhForm),
}

/// Build the initial PH form of the requested kind.
pub fn make_init(
    kind: InitKind,
    target: &LtiSystem,
    mode: Mode,
    truth: Option<&Truth>,
    w: &Weights,
    seed: u64,
) -> Result<PhForm> {
    match kind {
        InitKind::Standard => init::init_standard(target, mode),
        InitKind::LmiFormula => init::init_lmi_formula(target, &init::solve_delta_lmi(target)?, mode),
        InitKind::LmiSolve => init::init_lmi_solve(target, &init::solve_delta_lmi(target)?, mode, w),
        InitKind::Random => init::init_random(target, mode, seed, DEFAULT_KAPPA),
        InitKind::True => {
            let ph = match truth {
                Some(Truth::Msd(ph)) => init::init_true(ph, &target.d),
                Some(Truth::Exact(ph)) => ph.clone(),
                None => {
                    return Err(Error::PreconditionViolated("instance has no ground truth".into()));
                }
            };
            Ok(match mode {
                Mode::Descriptor => ph,
                Mode::Standard => PhForm { z: None, ..ph },
            })
        }
    }
}

/// Named reference systems available to benchmarks.
pub fn catalog_system(name: &str) -> Result<LtiSystem> {
    match name {
        "boyd-standard" => Ok(catalog::boyd_standard()),
        "index-two-descriptor" => Ok(catalog::index_two_descriptor()),
        "index-two-identity-e" => Ok(catalog::index_two_identity_e()),
        other => Err(Error::PreconditionViolated(format!("unknown catalog system '{other}'"))),
    }
}

/// Where a benchmark instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InstanceSpec {
    Catalog { system: String },
    Msd { p: usize, m: usize, eps: f64, seed: u64 },
    Random { n: usize, m: usize, eps_rel: f64, seed: u64 },
    /// System file; resolved by the caller.
    File { path: PathBuf },
}

/// A resolved benchmark instance.
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub name: String,
    /// Rows sharing a group are aggregated together (e.g. seeds of one setting).
    pub group: String,
    pub target: LtiSystem,
    pub truth: Option<Truth>,
    pub mode: Mode,
    pub seed: u64,
}

impl InstanceSpec {
    /// Build generated and catalog instances; `File` is left to the caller.
    pub fn build(&self) -> Result<(LtiSystem, Option<Truth>, u64)> {
        match self {
            InstanceSpec::Catalog { system } => Ok((catalog_system(system)?, None, 0)),
            InstanceSpec::Msd { p, m, eps, seed } => {
                let (ph, sys) = msd_generate(&MsdParams::new(*p, *m, *seed))?;
                Ok((msd_perturb(&ph, &sys, *eps)?, Some(Truth::Msd(ph)), *seed))
            }
            InstanceSpec::Random { n, m, eps_rel, seed } => {
                let (ph, sys) = random_pr_system(*n, *m, *seed)?;
                let (pert, _) = perturb_to_distance(&ph, &sys, *eps_rel)?;
                Ok((pert, Some(Truth::Exact(ph)), *seed))
            }
            InstanceSpec::File { path } => Err(Error::PreconditionViolated(format!(
                "file instance {} must be loaded by the caller",
                path.display()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceConfig {
    pub name: String,
    #[serde(default)]
    pub group: Option<String>,
    pub mode: Mode,
    pub source: InstanceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub instances: Vec<InstanceConfig>,
    pub inits: Vec<InitKind>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub bounds: Bounds,
    #[serde(default = "default_seconds")]
    pub max_seconds: f64,
    #[serde(default = "default_iters")]
    pub max_iters: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Seeds for the random initialization (one cell per seed).
    #[serde(default = "default_random_seeds")]
    pub random_seeds: Vec<u64>,
    /// Directory for per-cell trace CSVs.
    #[serde(default)]
    pub trace_dir: Option<PathBuf>,
}

fn default_seconds() -> f64 {
    60.0
}
fn default_iters() -> usize {
    1_000_000
}
fn default_tol() -> f64 {
    FgmOptions::default().tol_rel_decrease
}
fn default_random_seeds() -> Vec<u64> {
    vec![0]
}

impl BenchConfig {
    pub fn weights(&self) -> Result<Weights> {
        self.weights.as_deref().map_or(Ok(Weights::default()), Weights::from_slice)
    }

    pub fn fgm_options(&self) -> FgmOptions {
        FgmOptions {
            max_seconds: self.max_seconds,
            max_iters: self.max_iters,
            tol_rel_decrease: self.tol,
            ..FgmOptions::default()
        }
    }
}

/// Result of one (instance, init) cell. Failures leave `error` set and the
/// numeric fields empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub instance: String,
    pub group: String,
    pub init: InitKind,
    pub mode: Mode,
    pub seed: u64,
    pub initial_objective: Option<f64>,
    pub objective: Option<f64>,
    /// `sqrt(objective) / ‖target‖`, in percent.
    pub relative_error: Option<f64>,
    pub matrix_errors: Option<crate::model::RelativeErrors>,
    pub iterations: Option<usize>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub group: String,
    pub init: InitKind,
    pub count: usize,
    pub failures: usize,
    pub mean_objective: f64,
    pub std_objective: f64,
    pub mean_relative_error: f64,
    pub std_relative_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub cells: Vec<CellResult>,
    pub aggregate: Vec<AggregateRow>,
}

/// Resolve the non-file instances of a config.
pub fn resolve_instances(cfg: &BenchConfig) -> Result<Vec<BenchInstance>> {
    cfg.instances
        .iter()
        .map(|ic| {
            let (target, truth, seed) = ic.source.build()?;
            Ok(BenchInstance {
                name: ic.name.clone(),
                group: ic.group.clone().unwrap_or_else(|| ic.name.clone()),
                target,
                truth,
                mode: ic.mode,
                seed,
            })
        })
        .collect()
}

/// Run one cell.
pub fn run_cell(
    inst: &BenchInstance,
    kind: InitKind,
    seed: u64,
    w: &Weights,
    bounds: &Bounds,
    opts: &FgmOptions,
    trace_path: Option<&std::path::Path>,
) -> CellResult {
    let start = Instant::now();
    let mut cell = CellResult {
        instance: inst.name.clone(),
        group: inst.group.clone(),
        init: kind,
        mode: inst.mode,
        seed,
        initial_objective: None,
        objective: None,
        relative_error: None,
        matrix_errors: None,
        iterations: None,
        seconds: 0.0,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let x0 = make_init(kind, &inst.target, inst.mode, inst.truth.as_ref(), w, seed)?;
        let sol = solve_nearest(&inst.target, &x0, w, bounds, opts)?;
        cell.initial_objective = sol.trace.records.first().map(|r| r.objective);
        cell.objective = Some(sol.objective);
        cell.relative_error = Some(100.0 * (inst.target.distance2(&sol.system) / inst.target.norm2()).sqrt());
        cell.matrix_errors = Some(inst.target.relative_errors(&sol.system));
        cell.iterations = Some(sol.trace.records.len().saturating_sub(1));
        if let Some(path) = trace_path {
            let file = std::fs::File::create(path)
                .map_err(|e| Error::PreconditionViolated(format!("trace {}: {e}", path.display())))?;
            sol.trace
                .write_csv(file)
                .map_err(|e| Error::PreconditionViolated(format!("trace {}: {e}", path.display())))?;
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        cell.error = Some(e.to_string());
    }
    cell.seconds = start.elapsed().as_secs_f64();
    cell
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Mean and standard deviation per (group, init), in first-appearance order.
pub fn aggregate(cells: &[CellResult]) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, InitKind)> = Vec::new();
    for c in cells {
        let key = (c.group.clone(), c.init);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(group, init)| {
            let members: Vec<&CellResult> = cells.iter().filter(|c| c.group == group && c.init == init).collect();
            let objs: Vec<f64> = members.iter().filter_map(|c| c.objective).collect();
            let rels: Vec<f64> = members.iter().filter_map(|c| c.relative_error).collect();
            let (mo, so) = mean_std(&objs);
            let (mr, sr) = mean_std(&rels);
            AggregateRow {
                group,
                init,
                count: members.len(),
                failures: members.iter().filter(|c| c.error.is_some()).count(),
                mean_objective: mo,
                std_objective: so,
                mean_relative_error: mr,
                std_relative_error: sr,
            }
        })
        .collect()
}

/// Run every (instance, init) cell. Random initializations get one cell per
/// configured seed; per-cell failures are recorded and the run continues.
pub fn run_benchmark(instances: &[BenchInstance], cfg: &BenchConfig) -> Result<BenchReport> {
    let w = cfg.weights()?;
    let opts = cfg.fgm_options();
    opts.validate()?;
    if let Some(dir) = &cfg.trace_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::PreconditionViolated(format!("trace dir {}: {e}", dir.display())))?;
    }
    let mut cells = Vec::new();
    for inst in instances {
        for &kind in &cfg.inits {
            let seeds: Vec<u64> = if kind == InitKind::Random { cfg.random_seeds.clone() } else { vec![inst.seed] };
            for seed in seeds {
                let trace = cfg.trace_dir.as_ref().map(|d| {
                    let name = format!("{}_{}_{}.csv", sanitize(&inst.name), kind.label(), seed);
                    d.join(name)
                });
                cells.push(run_cell(inst, kind, seed, &w, &cfg.bounds, &opts, trace.as_deref()));
            }
        }
    }
    let aggregate = aggregate(&cells);
    Ok(BenchReport { cells, aggregate })
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

impl BenchReport {
    /// Per-cell CSV.
    pub fn write_cells_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "instance", "group", "init", "mode", "seed", "initial_objective", "objective", "relative_error_pct",
            "err_e_pct", "err_a_pct", "err_b_pct", "err_c_pct", "err_d_pct", "iterations", "seconds", "error",
        ])?;
        for c in &self.cells {
            let me = c.matrix_errors;
            w.write_record([
                c.instance.clone(),
                c.group.clone(),
                c.init.label().to_string(),
                format!("{:?}", c.mode).to_lowercase(),
                c.seed.to_string(),
                fmt_opt(c.initial_objective),
                fmt_opt(c.objective),
                fmt_opt(c.relative_error),
                fmt_opt(me.map(|e| e.e)),
                fmt_opt(me.map(|e| e.a)),
                fmt_opt(me.map(|e| e.b)),
                fmt_opt(me.map(|e| e.c)),
                fmt_opt(me.map(|e| e.d)),
                c.iterations.map_or(String::new(), |i| i.to_string()),
                format!("{:.3}", c.seconds),
                c.error.clone().unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Aggregate table: one row per group, one objective column per init.
    pub fn write_table_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut inits: Vec<InitKind> = Vec::new();
        let mut groups: Vec<String> = Vec::new();
        for r in &self.aggregate {
            if !inits.contains(&r.init) {
                inits.push(r.init);
            }
            if !groups.contains(&r.group) {
                groups.push(r.group.clone());
            }
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["group".to_string()];
        for k in &inits {
            header.push(format!("{}_objective", k.label()));
            header.push(format!("{}_objective_std", k.label()));
            header.push(format!("{}_relative_error_pct", k.label()));
        }
        w.write_record(&header)?;
        for g in &groups {
            let mut row = vec![g.clone()];
            for k in &inits {
                match self.aggregate.iter().find(|r| &r.group == g && r.init == *k) {
                    Some(r) => {
                        row.push(format!("{:e}", r.mean_objective));
                        row.push(format!("{:e}", r.std_objective));
                        row.push(format!("{:e}", r.mean_relative_error));
                    }
                    None => row.extend([String::new(), String::new(), String::new()]),
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}
