//! `invopt`: run the online inverse-optimization experiments, solve or validate a model file.
//!
//! Exit codes: 0 on success, 2 on configuration or usage errors, 3 on numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use invopt::config::{ProblemFile, RunFile};
use invopt::experiments::runner::{
    aggregate, Experiment, ExperimentConfig, RepResult, Setup, StartKind,
};
use invopt::model::validate;
use invopt::{qp, Error};
use log::info;
use rayon::prelude::*;

#[derive(Debug, Parser)]
#[command(
    name = "invopt",
    version,
    about = "Online inverse optimization for convex quadratic decision problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Learn the consumer's utility vector from (price, noisy bundle) pairs.
    RunConsumer(RunArgs),
    /// Learn the consumer's budget.
    RunBudget(RunArgs),
    /// Learn two edge costs of the transshipment network.
    RunTransshipment(RunArgs),
    /// Solve the forward problem of a model file at its `theta` and `u`.
    SolveQp { file: PathBuf },
    /// Estimate the regularity constants of a model file and print diagnostics.
    ValidateModel {
        file: PathBuf,
        /// Seed for parameter-corner sampling when p > 4.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Rounds per repetition.
    #[arg(long = "T", visible_alias = "rounds", value_name = "T")]
    rounds: Option<usize>,
    /// Number of repetitions.
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed; repetition i uses seed + i for its stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Learning-rate scale in eta_t = eta0 / sqrt(t).
    #[arg(long, allow_negative_numbers = true)]
    eta0: Option<f64>,
    /// Initial hypothesis: box lower corner or the KKT-residual fit.
    #[arg(long, value_parser = ["cold", "warm"])]
    start: Option<String>,
    /// Length of the warm-start history.
    #[arg(long)]
    history: Option<usize>,
    /// Output directory.
    #[arg(long, env = "INVOPT_OUT_DIR", default_value = "invopt-out")]
    out_dir: PathBuf,
    /// Worker threads for repetitions (default: number of processors).
    #[arg(long)]
    jobs: Option<usize>,
    /// TOML file with experiment overrides; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Exit code for a library error.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Round { source, .. } => exit_code(source),
        Error::Qp(_) | Error::InfeasibleForward | Error::InfeasibleUpdate | Error::NonFinite(_) => {
            3
        }
        _ => 2,
    }
}

fn experiment_config(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::new(experiment);
    if let Some(path) = &args.config {
        RunFile::load(path)?.apply(&mut cfg)?;
    }
    if let Some(v) = args.rounds {
        cfg.rounds = v;
    }
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.eta0 {
        cfg.eta0 = v;
    }
    if let Some(v) = &args.start {
        cfg.start = v.parse::<StartKind>()?;
    }
    if let Some(v) = args.history {
        cfg.history_len = v;
    }
    cfg.check()?;
    Ok(cfg)
}

fn run_experiment(experiment: Experiment, args: &RunArgs) -> Result<(), Error> {
    let cfg = experiment_config(experiment, args)?;
    let setup = Setup::new(&cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    info!(
        "{experiment}: {} reps of {} rounds, eta0 = {}",
        cfg.reps, cfg.rounds, cfg.eta0
    );
    let results: Vec<RepResult> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|rep| setup.run_rep(rep))
            .collect::<Result<Vec<_>, Error>>()
    })?;

    let dir = args.out_dir.join(experiment.name());
    std::fs::create_dir_all(&dir)?;
    for r in &results {
        r.trace
            .write_csv_file(&dir.join(format!("trace_rep{:03}.csv", r.rep)))?;
    }
    let agg = aggregate(&setup, &results);
    agg.write_csv(std::io::BufWriter::new(std::fs::File::create(
        dir.join("aggregate.csv"),
    )?))?;
    let summary = agg.summary(&setup);
    std::fs::write(dir.join("summary.txt"), &summary)?;
    print!("{summary}");
    println!("output: {}", dir.display());
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", parts.join(", "))
}

fn solve_qp(path: &Path) -> Result<(), Error> {
    let file = ProblemFile::load(path)?;
    let problem = file.problem()?;
    let qp = problem.instantiate(&file.theta()?, &file.signal())?;
    let sol = qp::solve(&qp)?;
    println!("status: optimal");
    println!("x: {}", fmt_vec(sol.x.as_slice()));
    println!("objective: {}", sol.objective);
    println!("inequality multipliers: {}", fmt_vec(sol.u_ineq.as_slice()));
    println!("equality multipliers: {}", fmt_vec(sol.u_eq.as_slice()));
    println!("kkt residual: {:e}", sol.kkt_residual);
    println!("iterations: {}", sol.iterations);
    Ok(())
}

fn validate_model(path: &Path, seed: u64) -> Result<(), Error> {
    let file = ProblemFile::load(path)?;
    let problem = file.problem()?;
    let bx = file.parameter_box()?;
    let report = validate(
        &problem,
        &bx,
        &file.validation_signals(),
        &file.observations()?,
        seed,
    )?;
    let c = &report.constants;
    println!("lambda: {}", c.lambda);
    println!("B: {}", c.b_bound);
    println!("R: {}", c.r_bound);
    println!("kappa: {}", c.kappa);
    println!("D: {}", c.d_bound);
    println!(
        "samples used: {}, skipped: {}",
        report.samples_used, report.samples_skipped
    );
    for d in &report.diagnostics {
        println!("diagnostic: {d}");
    }
    println!("all constants positive: {}", report.passed());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let outcome = match &cli.command {
        Command::RunConsumer(args) => run_experiment(Experiment::Consumer, args),
        Command::RunBudget(args) => run_experiment(Experiment::Budget, args),
        Command::RunTransshipment(args) => run_experiment(Experiment::Transshipment, args),
        Command::SolveQp { file } => solve_qp(file),
        Command::ValidateModel { file, seed } => validate_model(file, *seed),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
