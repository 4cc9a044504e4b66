use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracfem_core::error_analysis::Scheme;
use fracfem_core::harness::{
    reproduce_table_levels, resolve_output_dir, run_plan, CheckResult, ExperimentPlan, SolverPath,
};
use fracfem_core::mesh::SpacingRule;
use fracfem_core::special::MittagLeffler;
use fracfem_core::{checks, par, Error};

const EXIT_TOLERANCE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "fracfem", version, about = "Finite element convergence experiments for subdiffusion")]
struct Cli {
    /// Worker threads (0 = all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment plan; flags override the config file
    Run(RunArgs),
    /// Reproduce one of the reference tables and compare with stored values
    Table {
        #[arg(value_parser = clap::value_parser!(u32).range(1..=9))]
        id: u32,
        /// Output directory (FRACFEM_OUT takes precedence when set)
        #[arg(long, default_value = "out")]
        output: PathBuf,
        /// Restrict to these mesh levels (h = 1/2^k)
        #[arg(long = "level")]
        levels: Vec<u32>,
    },
    /// Evaluate E_{α,β}(z) to 17 significant digits
    MlEval {
        alpha: f64,
        beta: f64,
        #[arg(allow_hyphen_values = true)]
        z: f64,
    },
    /// Run the property smoke suite
    Check {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Plan file with `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long = "scheme")]
    schemes: Vec<Scheme>,
    #[arg(long = "example")]
    examples: Vec<String>,
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    #[arg(long = "time")]
    times: Vec<f64>,
    #[arg(long = "level")]
    levels: Vec<u32>,
    /// standard | offset
    #[arg(long)]
    spacing: Option<String>,
    /// eigen | l1
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    normalize: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn build_plan(args: RunArgs, jobs: Option<usize>) -> fracfem_core::Result<ExperimentPlan> {
    let mut plan = match &args.config {
        Some(path) => ExperimentPlan::load(path)?,
        None => ExperimentPlan::default(),
    };
    let flag_err = |msg: String| Error::Config {
        path: "<command line>".into(),
        line: 0,
        msg,
    };
    macro_rules! replace {
        ($field:ident, $value:expr) => {
            if !$value.is_empty() {
                plan.$field = $value;
            }
        };
    }
    if let Some(v) = args.name {
        plan.name = v;
    }
    if let Some(v) = args.dim {
        plan.dim = v;
    }
    replace!(schemes, args.schemes);
    replace!(examples, args.examples);
    replace!(alphas, args.alphas);
    replace!(times, args.times);
    replace!(levels, args.levels);
    if let Some(v) = args.spacing {
        plan.spacing = match v.as_str() {
            "standard" => SpacingRule::Standard,
            "offset" => SpacingRule::Offset,
            _ => return Err(flag_err(format!("spacing must be 'standard' or 'offset', got '{v}'"))),
        };
    }
    let current_tau = match plan.solver {
        SolverPath::FullyDiscrete { tau } => Some(tau),
        SolverPath::Eigen => None,
    };
    let solver = args.solver.as_deref().unwrap_or(if current_tau.is_some() { "l1" } else { "eigen" });
    plan.solver = match (solver, args.tau.or(current_tau)) {
        ("eigen", _) => SolverPath::Eigen,
        ("l1", Some(tau)) => SolverPath::FullyDiscrete { tau },
        ("l1", None) => return Err(flag_err("solver l1 needs --tau".into())),
        (other, _) => return Err(flag_err(format!("solver must be 'eigen' or 'l1', got '{other}'"))),
    };
    if let Some(v) = args.output {
        plan.output_dir = v;
    }
    if let Some(v) = args.normalize {
        plan.normalize = v;
    }
    if let Some(v) = args.seed {
        plan.seed = v;
    }
    if let Some(v) = jobs {
        plan.jobs = v;
    }
    plan.validate()?;
    Ok(plan)
}

fn print_checks(checks: &[CheckResult]) -> bool {
    let mut ok = true;
    for c in checks {
        let verdict = match (c.pass, c.informational) {
            (true, _) => "pass",
            (false, true) => "info",
            (false, false) => {
                ok = false;
                "FAIL"
            }
        };
        println!("{verdict:4}  {}: observed {:.6e}, expected {}", c.name, c.observed, c.expected);
    }
    ok
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let jobs = cli.jobs.unwrap_or(0);

    match cli.command {
        Command::MlEval { alpha, beta, z } => {
            let value = MittagLeffler::new(alpha, beta).and_then(|f| f.eval(z));
            match value {
                Ok(v) => {
                    println!("{v:.16e}");
                    ExitCode::SUCCESS
                }
                Err(e @ Error::Domain(_)) => usage(e),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_TOLERANCE)
                }
            }
        }
        Command::Check { seed } => match par::with_jobs(jobs, || checks::property_checks(seed)) {
            Ok(results) => {
                if print_checks(&results) {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(EXIT_TOLERANCE)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_TOLERANCE)
            }
        },
        Command::Table { id, output, levels } => {
            let levels = (!levels.is_empty()).then_some(levels.as_slice());
            match par::with_jobs(jobs, || reproduce_table_levels(id, &output, levels)) {
                Ok(report) => {
                    let ok = print_checks(&report.checks);
                    for f in &report.failures {
                        println!("FAIL  run: {f}");
                    }
                    println!(
                        "table {id}: {} (report in {})",
                        if report.passed() { "PASS" } else { "FAIL" },
                        resolve_output_dir(&output).join(format!("table{id}")).display()
                    );
                    if ok && report.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_TOLERANCE)
                    }
                }
                Err(e @ Error::Domain(_)) => usage(e),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_TOLERANCE)
                }
            }
        }
        Command::Run(args) => {
            let plan = match build_plan(args, cli.jobs) {
                Ok(p) => p,
                Err(e) => return usage(e),
            };
            match run_plan(&plan) {
                Ok(outcome) => {
                    print!("{}", outcome.table.to_markdown());
                    for f in &outcome.failures {
                        eprintln!("failed: {f}");
                    }
                    for f in &outcome.files {
                        log::info!("wrote {}", f.display());
                    }
                    if outcome.failures.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_TOLERANCE)
                    }
                }
                Err(e @ Error::Config { .. }) => usage(e),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_TOLERANCE)
                }
            }
        }
    }
}
