//! Non-interactive command-line front end: run the relaxation hierarchy,
//! brute-force oracles and the local baseline, and export SDPA files.
//!
//! Exit codes: 0 success/certified, 2 order budget exhausted without a
//! certificate, 64 usage errors, 65 unsupported-capability errors (too many
//! elements for the oracle, relaxation order below the minimum), 1 anything
//! else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use frameopt::baseline::{optimality_criteria, OcOptions};
use frameopt::certify::{run_hierarchy, CbarChoice, HierarchyOptions, StopRule, Termination};
use frameopt::fem::{grid_oracle, FemError};
use frameopt::formulate;
use frameopt::moments::build_relaxation;
use frameopt::sdpcore::{export_sdpa, Backend, SolverOptions};
use frameopt::structmodel::load_problem;
use frameopt::{Problem, Real};

/// Environment variable naming the external SDP solver executable.
const EXTERNAL_SOLVER_ENV: &str = "FRAMEOPT_SDP_SOLVER";

const EXIT_BUDGET: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_UNSUPPORTED: u8 = 65;

#[derive(Parser)]
#[command(name = "frameopt", version, about = "Certified globally optimal frame sizing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the relaxation hierarchy and write certified reports.
    Solve(SolveArgs),
    /// Brute-force grid search over the design simplex (up to 3 elements).
    Oracle(OracleArgs),
    /// Optimality-criteria local optimizer.
    Baseline(BaselineArgs),
    /// Export one relaxation order in SDPA sparse format.
    ExportSdpa(ExportArgs),
}

#[derive(Args)]
struct SolveArgs {
    problem: PathBuf,
    /// First relaxation order (clamped up to the program minimum).
    #[arg(long)]
    r_min: Option<u32>,
    /// Last relaxation order.
    #[arg(long, default_value_t = 4)]
    r_max: u32,
    /// Absolute epsilon target; default is 1e-6 * max(1, |UB|).
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, value_enum, default_value_t = StopArg::Eps)]
    stop: StopArg,
    #[arg(long, value_enum, default_value_t = SolverArg::Reference)]
    solver: SolverArg,
    #[arg(long, value_enum, default_value_t = CbarArg::Uniform)]
    cbar: CbarArg,
    /// Reference-solver capacity (total PSD dimension).
    #[arg(long, default_value_t = 400)]
    max_psd_dim: usize,
    /// Output directory for report.json and trace.csv.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum StopArg {
    Eps,
    Flat,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Reference,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum CbarArg {
    Uniform,
    Truss,
}

#[derive(Args)]
struct OracleArgs {
    problem: PathBuf,
    /// Grid subdivisions per element axis (at least 100).
    #[arg(long)]
    resolution: usize,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct BaselineArgs {
    problem: PathBuf,
    /// `uniform` or a comma-separated start design.
    #[arg(long, default_value = "uniform")]
    start: String,
    /// Output directory for baseline.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    problem: PathBuf,
    /// Relaxation order.
    #[arg(long)]
    order: u32,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    return ExitCode::SUCCESS;
                }
                _ => EXIT_USAGE,
            };
            eprint!("{e}");
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::ExportSdpa(args) => cmd_export(args),
    }
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::FAILURE
}

fn load(path: &Path) -> Result<Problem, ExitCode> {
    load_problem::<Real>(path).map_err(|e| fail(e))
}

/// FNV-1a over the raw problem bytes; recorded for reproducibility.
fn fnv64(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

fn solver_options(solver: SolverArg, max_psd_dim: usize) -> Result<SolverOptions, ExitCode> {
    let backend = match solver {
        SolverArg::Reference => Backend::Reference,
        SolverArg::External => {
            let exe = std::env::var_os(EXTERNAL_SOLVER_ENV).ok_or_else(|| {
                fail(format!("--solver external requires the {EXTERNAL_SOLVER_ENV} environment variable"))
            })?;
            Backend::External(PathBuf::from(exe))
        }
    };
    Ok(SolverOptions { max_psd_dim, backend, ..SolverOptions::default() })
}

fn cmd_solve(args: SolveArgs) -> ExitCode {
    let gs = match load(&args.problem) {
        Ok(gs) => gs,
        Err(code) => return code,
    };
    let solver = match solver_options(args.solver, args.max_psd_dim) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let opts = HierarchyOptions {
        r_min: args.r_min,
        r_max: args.r_max,
        eps_target: args.eps,
        stop: match args.stop {
            StopArg::Eps => StopRule::Epsilon,
            StopArg::Flat => StopRule::Flat,
            StopArg::Both => StopRule::Both,
        },
        cbar: match args.cbar {
            CbarArg::Uniform => CbarChoice::Uniform,
            CbarArg::Truss => CbarChoice::Truss,
        },
        solver,
        ..HierarchyOptions::default()
    };

    let report = match run_hierarchy(&gs, &opts) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };

    if let Err(e) = std::fs::create_dir_all(&args.out) {
        return fail(format!("cannot create {}: {e}", args.out.display()));
    }
    let problem_bytes = std::fs::read(&args.problem).unwrap_or_default();
    let record = serde_json::json!({
        "tool": "frameopt",
        "version": env!("CARGO_PKG_VERSION"),
        "timestamp_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        "problem_file": args.problem.display().to_string(),
        "problem_hash_fnv64": fnv64(&problem_bytes),
        "options": {
            "r_min": args.r_min,
            "r_max": args.r_max,
            "eps": args.eps,
            "stop": format!("{:?}", opts.stop),
            "cbar": format!("{:?}", opts.cbar),
            "solver": match args.solver { SolverArg::Reference => "reference", SolverArg::External => "external" },
            "max_psd_dim": args.max_psd_dim,
        },
        "report": report.to_json(),
    });
    let report_path = args.out.join("report.json");
    if let Err(e) = std::fs::write(&report_path, serde_json::to_string_pretty(&record).unwrap()) {
        return fail(format!("cannot write {}: {e}", report_path.display()));
    }
    let trace_path = args.out.join("trace.csv");
    if let Err(e) = std::fs::write(&trace_path, report.to_csv()) {
        return fail(format!("cannot write {}: {e}", trace_path.display()));
    }

    for c in &report.orders {
        println!(
            "r={}  LB={:.6}  UB={:.6}  gap={:.3e}  flat={}  s={}",
            c.order,
            c.lower_bound,
            c.upper_bound,
            c.gap,
            c.flat,
            c.s.map(|s| s.to_string()).unwrap_or_else(|| "-".into()),
        );
        for m in &c.minimizers {
            let a: Vec<String> = m.design.iter().map(|v| format!("{v:.6}")).collect();
            println!("    minimizer [{}]  objective {:.6}", a.join(", "), m.objective);
        }
    }
    match report.termination {
        Termination::EpsilonMet | Termination::FlatExtension => {
            let best = report.best().expect("certified run has orders");
            let eps = opts
                .eps_target
                .unwrap_or_else(|| 1e-6 * 1.0f64.max(best.upper_bound.abs()));
            if report.termination == Termination::FlatExtension {
                println!(
                    "CERTIFIED rank condition, s = {}, c* = {:.3}",
                    best.s.unwrap_or(0),
                    best.upper_bound
                );
            }
            println!("CERTIFIED ε ≤ {eps:.3e}, c* = {:.3}", best.upper_bound);
            ExitCode::SUCCESS
        }
        Termination::OrderBudget => {
            let gap = report.best().map(|c| c.gap).unwrap_or(f64::NAN);
            println!("NOT CERTIFIED: order budget exhausted, best gap {gap:.3e}");
            ExitCode::from(EXIT_BUDGET)
        }
        Termination::SolverFailure => {
            fail(report.failure.as_deref().unwrap_or("solver failure"))
        }
    }
}

fn cmd_oracle(args: OracleArgs) -> ExitCode {
    if args.resolution < 100 {
        eprintln!("error: --resolution must be at least 100");
        return ExitCode::from(EXIT_USAGE);
    }
    let gs = match load(&args.problem) {
        Ok(gs) => gs,
        Err(code) => return code,
    };
    match grid_oracle(&gs, args.resolution, args.threads) {
        Ok(res) => {
            let a: Vec<String> = res.best_a.iter().map(|v| format!("{v:.6}")).collect();
            println!("grid minimum {:.6} at [{}] ({} points)", res.best_objective, a.join(", "), res.evaluated);
            ExitCode::SUCCESS
        }
        Err(e @ FemError::TooManyElements(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_UNSUPPORTED)
        }
        Err(e) => fail(e),
    }
}

fn cmd_baseline(args: BaselineArgs) -> ExitCode {
    let gs = match load(&args.problem) {
        Ok(gs) => gs,
        Err(code) => return code,
    };
    let start = if args.start == "uniform" {
        None
    } else {
        let parsed: Result<Vec<Real>, _> =
            args.start.split(',').map(|t| t.trim().parse::<Real>()).collect();
        match parsed {
            Ok(v) if v.len() == gs.n_elements() => Some(v),
            Ok(v) => {
                eprintln!(
                    "error: --start has {} entries, problem has {} elements",
                    v.len(),
                    gs.n_elements()
                );
                return ExitCode::from(EXIT_USAGE);
            }
            Err(e) => {
                eprintln!("error: bad --start vector: {e}");
                return ExitCode::from(EXIT_USAGE);
            }
        }
    };
    let opts = OcOptions { start, ..OcOptions::default() };
    match optimality_criteria(&gs, &opts) {
        Ok(res) => {
            let a: Vec<String> = res.design.iter().map(|v| format!("{v:.6}")).collect();
            println!(
                "baseline objective {:.6} at [{}] after {} iterations (converged: {})",
                res.objective,
                a.join(", "),
                res.iterations,
                res.converged
            );
            if let Err(e) = std::fs::create_dir_all(&args.out) {
                return fail(format!("cannot create {}: {e}", args.out.display()));
            }
            let record = serde_json::json!({
                "tool": "frameopt",
                "version": env!("CARGO_PKG_VERSION"),
                "problem_file": args.problem.display().to_string(),
                "method": "optimality_criteria",
                "design": res.design,
                "objective": res.objective,
                "iterations": res.iterations,
                "converged": res.converged,
            });
            let path = args.out.join("baseline.json");
            if let Err(e) = std::fs::write(&path, serde_json::to_string_pretty(&record).unwrap()) {
                return fail(format!("cannot write {}: {e}", path.display()));
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn cmd_export(args: ExportArgs) -> ExitCode {
    let gs = match load(&args.problem) {
        Ok(gs) => gs,
        Err(code) => return code,
    };
    let built = (|| {
        let ps = frameopt::fem::assemble(&gs)?;
        let bounds = formulate::variable_bounds(&ps)?;
        let nsdp = formulate::scale_problem(&ps, bounds);
        Ok::<_, frameopt::certify::CertifyError>(nsdp)
    })();
    let nsdp = match built {
        Ok(n) => n,
        Err(e) => return fail(e),
    };
    match build_relaxation(&nsdp.program, args.order) {
        Ok((sdp, _)) => match export_sdpa(&sdp, &args.out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(e),
        },
        Err(e @ frameopt::moments::MomentError::OrderTooLow { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_UNSUPPORTED)
        }
        Err(e) => fail(e),
    }
}
