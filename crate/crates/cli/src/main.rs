//! `passive-ph`: nearest passive systems from the command line.
//!
//! Exit codes: 0 success, 1 I/O or parse failure, 2 solver failure.

mod io;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use passive_ph::analysis::{self, ReportOptions};
use passive_ph::experiments::{self, BenchConfig, BenchInstance, InitKind, InstanceSpec, MsdParams, Truth};
use passive_ph::{Bounds, FgmOptions, LtiSystem, Mode, PhForm, Weights};

use crate::io::SystemFile;

#[derive(Parser)]
#[command(name = "passive-ph", version, about = "Nearest passive (positive-real) LTI systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a nearby port-Hamiltonian (hence passive) system.
    Nearest(NearestArgs),
    /// Stability, admissibility and passivity diagnostics.
    Check(CheckArgs),
    /// Generate test systems.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run a benchmark described by a JSON config.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// System file (JSON, or a MatrixMarket manifest).
    #[arg(long)]
    input: PathBuf,
    /// Force the input format: json or mm.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct NearestArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Where to write the solved system and its PH form.
    #[arg(long)]
    output: Option<PathBuf>,
    /// standard (E = I kept fixed) or descriptor (E perturbed too).
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, default_value = "standard")]
    init: String,
    /// PH form for `--init file` (defaults to the ph block of the input).
    #[arg(long)]
    init_file: Option<PathBuf>,
    /// w1,w2,w3,w4[,w5]
    #[arg(long, value_delimiter = ',')]
    weights: Option<Vec<f64>>,
    #[arg(long = "deltaK", default_value_t = 0.0)]
    delta_k: f64,
    #[arg(long = "nuZ", default_value_t = 0.0)]
    nu_z: f64,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    max_seconds: Option<f64>,
    /// Relative decrease threshold for stopping.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alpha1: Option<f64>,
    /// CSV file for the objective trace.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Where to write the JSON report.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Also solve the relaxed LMIs for δ*.
    #[arg(long)]
    delta: bool,
    #[arg(long, default_value_t = 200)]
    grid_points: usize,
    #[arg(long, default_value_t = 1e-3)]
    w_min: f64,
    #[arg(long, default_value_t = 1e3)]
    w_max: f64,
}

#[derive(Subcommand)]
enum GenCommand {
    /// Mass-spring-damper system with damping perturbation ε.
    Msd {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Reference system: boyd-standard, index-two-descriptor or index-two-identity-e.
    Catalog {
        #[arg(long)]
        system: String,
        /// Output file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Random PH system perturbed to a relative distance.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        eps_rel: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "bench-out")]
    out_dir: PathBuf,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Input(anyhow::Error),
    Solver(anyhow::Error),
}

type CmdResult = Result<(), Failure>;

trait InputContext<T> {
    fn input(self) -> Result<T, Failure>;
    fn solver(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputContext<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }
    fn solver(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Solver(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Nearest(args) => cmd_nearest(args),
        Command::Check(args) => cmd_check(args),
        Command::Gen(cmd) => cmd_gen(cmd),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("solver error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn cmd_nearest(args: NearestArgs) -> CmdResult {
    let file = io::read_system(&args.input.input, args.input.format.as_deref()).input()?;
    let target = file.system().input()?;
    let mode = args.mode.unwrap_or(file.mode);
    let w = match &args.weights {
        Some(v) => Weights::from_slice(v).input()?,
        None => Weights::default(),
    };
    let bounds = Bounds { delta_k: args.delta_k, nu_z: args.nu_z };
    let mut opts = FgmOptions::default();
    if let Some(v) = args.max_iters {
        opts.max_iters = v;
    }
    if let Some(v) = args.max_seconds {
        opts.max_seconds = v;
    }
    if let Some(v) = args.tol {
        opts.tol_rel_decrease = v;
    }
    if let Some(v) = args.alpha1 {
        opts.alpha1 = v;
    }
    opts.validate().input()?;

    let x0 = match args.init.as_str() {
        "file" => {
            let source = match &args.init_file {
                Some(p) => io::read_system(p, None).input()?,
                None => file.clone(),
            };
            let ph = source.ph_form().input()?.ok_or_else(|| anyhow!("no ph block for --init file")).input()?;
            match mode {
                Mode::Standard => PhForm { z: None, ..ph },
                Mode::Descriptor if ph.z.is_none() => {
                    let z = target.e.transpose() * &ph.q;
                    PhForm { z: Some(z), ..ph }
                }
                Mode::Descriptor => ph,
            }
        }
        other => {
            let kind: InitKind = other.parse().input()?;
            let truth = file.ph_form().input()?.map(Truth::Exact);
            experiments::make_init(kind, &target, mode, truth.as_ref(), &w, args.seed).solver()?
        }
    };

    let sol = passive_ph::solve_nearest(&target, &x0, &w, &bounds, &opts).solver()?;
    let rel = target.relative_errors(&sol.system);
    println!("objective {:.10e}", sol.objective);
    println!("iterations {}", sol.trace.records.len().saturating_sub(1));
    println!("stop {:?}", sol.trace.stop);
    println!(
        "relative_error_pct E {:.4} A {:.4} B {:.4} C {:.4} D {:.4}",
        rel.e, rel.a, rel.b, rel.c, rel.d
    );
    if let Some(path) = &args.output {
        io::write_json(path, &SystemFile::from_system(&sol.system, mode, Some(&sol.ph))).input()?;
    }
    if let Some(path) = &args.trace {
        let f = fs::File::create(path).with_context(|| format!("creating {}", path.display())).input()?;
        sol.trace.write_csv(f).input()?;
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> CmdResult {
    let file = io::read_system(&args.input.input, args.input.format.as_deref()).input()?;
    let sys = file.system().input()?;
    let ph = file.ph_form().input()?;
    let opts = ReportOptions {
        grid_points: args.grid_points,
        w_min: args.w_min,
        w_max: args.w_max,
        lmi_x: ph.as_ref().map(|p| p.q.clone()),
        solve_delta: args.delta,
        ..ReportOptions::default()
    };
    let report = analysis::passivity_report(&sys, &opts);
    let fmt_flag = |v: Option<bool>| v.map_or("unknown".to_string(), |b| b.to_string());
    println!("regular {}", fmt_flag(report.regular));
    println!("index_le_one {}", fmt_flag(report.index_le_one));
    println!("asymptotically_stable {}", fmt_flag(report.asymptotically_stable));
    println!("admissible {}", fmt_flag(report.admissible));
    println!("infinite_eigenvalues {}", report.infinite_eigenvalues);
    for l in &report.finite_eigenvalues {
        println!("finite_eigenvalue {:.6} {:+.6}j", l.re, l.im);
    }
    println!("grid {}", report.grid_evidence);
    if let Some(d) = report.delta_star {
        println!("delta_star {d:.6e}");
    }
    if let Some(lmi) = &report.lmi {
        if lmi.certified_pr {
            println!("PR certificate: KYP LMIs satisfied with X={}", lmi.x_source);
        } else {
            println!("no PR certificate: KYP LMIs violated with X={}", lmi.x_source);
        }
        if lmi.certified_strict {
            println!("strict certificate: strict KYP LMIs satisfied with X={}", lmi.x_source);
        }
        println!("lmi_lambda_max {:.6e}", lmi.residual.lambda_max_block);
    }
    if let Some(h) = &report.hamiltonian {
        println!("hamiltonian_positive_real {}", h.positive_real);
    }
    for e in &report.errors {
        eprintln!("note: {e}");
    }
    if let Some(path) = &args.output {
        fs::write(path, report.to_json()).with_context(|| format!("writing {}", path.display())).input()?;
    }
    Ok(())
}

fn cmd_gen(cmd: GenCommand) -> CmdResult {
    match cmd {
        GenCommand::Msd { p, m, eps, seed, out_dir } => {
            let (ph, sys) = experiments::msd_generate(&MsdParams::new(p, m, seed)).solver()?;
            let pert = experiments::msd_perturb(&ph, &sys, eps).solver()?;
            write_pair(&out_dir, &format!("msd_p{p}_m{m}_s{seed}"), &sys, &ph, &pert)
        }
        GenCommand::Catalog { system, output } => {
            let sys = experiments::catalog_system(&system).input()?;
            let mode = if sys.is_standard() { Mode::Standard } else { Mode::Descriptor };
            io::write_json(&output, &SystemFile::from_system(&sys, mode, None)).input()?;
            println!("wrote {}", output.display());
            Ok(())
        }
        GenCommand::Random { n, m, eps_rel, seed, out_dir } => {
            let (ph, sys) = experiments::random_pr_system(n, m, seed).solver()?;
            let (pert, delta) = experiments::perturb_to_distance(&ph, &sys, eps_rel).solver()?;
            println!("delta {delta:.10e}");
            println!("relative_distance {:.10e}", experiments::relative_distance(&sys, &pert));
            write_pair(&out_dir, &format!("random_n{n}_m{m}_s{seed}"), &sys, &ph, &pert)
        }
    }
}

fn write_pair(dir: &Path, stem: &str, sys: &LtiSystem, ph: &PhForm, pert: &LtiSystem) -> CmdResult {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).input()?;
    let truth = dir.join(format!("{stem}_true.json"));
    let perturbed = dir.join(format!("{stem}_perturbed.json"));
    io::write_json(&truth, &SystemFile::from_system(sys, Mode::Descriptor, Some(ph))).input()?;
    // the perturbed file carries the true form so that `--init true` works on it
    io::write_json(&perturbed, &SystemFile::from_system(pert, Mode::Descriptor, Some(ph))).input()?;
    println!("wrote {}", truth.display());
    println!("wrote {}", perturbed.display());
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> CmdResult {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))
        .input()?;
    let mut cfg: BenchConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.config.display()))
        .input()?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let mut instances = Vec::with_capacity(cfg.instances.len());
    for ic in &cfg.instances {
        let (target, truth, seed) = match &ic.source {
            InstanceSpec::File { path } => {
                let f = io::read_system(&base.join(path), None).input()?;
                (f.system().input()?, f.ph_form().input()?.map(Truth::Exact), 0)
            }
            other => other.build().solver()?,
        };
        instances.push(BenchInstance {
            name: ic.name.clone(),
            group: ic.group.clone().unwrap_or_else(|| ic.name.clone()),
            target,
            truth,
            mode: ic.mode,
            seed,
        });
    }
    fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))
        .input()?;
    if cfg.trace_dir.is_none() {
        cfg.trace_dir = Some(args.out_dir.join("traces"));
    }
    let report = experiments::run_benchmark(&instances, &cfg).solver()?;
    let cells = fs::File::create(args.out_dir.join("cells.csv")).input()?;
    report.write_cells_csv(cells).input()?;
    let table = fs::File::create(args.out_dir.join("table.csv")).input()?;
    report.write_table_csv(table).input()?;
    fs::write(args.out_dir.join("report.json"), report.to_json()).input()?;
    for row in &report.aggregate {
        println!(
            "{} {} objective {:.6e} (± {:.2e}) relative_error_pct {:.4} failures {}",
            row.group,
            row.init.label(),
            row.mean_objective,
            row.std_objective,
            row.mean_relative_error,
            row.failures
        );
    }
    Ok(())
}
