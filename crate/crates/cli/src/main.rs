//! `drobandit`: robust evaluation and learning of linear policies from
//! logged bandit data, plus the synthetic-environment experiment harness.
//!
//! Subcommands: `evaluate`, `learn`, `experiment`, `boundary`, `simulate`.
//! Reports are JSON (stdout, or `--out`); matrices and grids are CSV. Exit
//! codes: 0 on success, 1 on validation errors, 2 on I/O errors. Relative
//! output paths are resolved against `DROBANDIT_OUT_DIR` when set.

use clap::{Args, Parser, Subcommand};
use drobandit::bayes::bayes_dro_policy;
use drobandit::dual::{solve_dual, DualCurve, SolverConfig};
use drobandit::fdiv::{solve_fdiv, CressieReadCurve};
use drobandit::learn::{learn_dro_with, learn_lin_diag, GdConfig, OuterConfig};
use drobandit::policy::Policy;
use drobandit::{Error, LoggedDataset, Result};
use drobandit_cli::env_select::EnvKind;
use drobandit_cli::harness::{boundary_grid, run_experiment, write_boundary_csv, ExperimentSpec};
use drobandit_cli::policy_io;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "drobandit",
    version,
    about = "Distributionally robust evaluation and learning for logged bandit data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Robust value of a policy on a logged dataset.
    Evaluate(EvaluateArgs),
    /// Learn a linear policy from a logged dataset (robust by default).
    Learn(LearnArgs),
    /// Replication sweep: learn robust/non-robust policies and score both.
    Experiment(ExperimentArgs),
    /// Decision map of a policy over the (x1, x2) square, other coordinates 0.
    Boundary(BoundaryArgs),
    /// Generate synthetic data from a built-in environment.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Logged dataset CSV (header x1..xp,action,reward,propensity).
    #[arg(long)]
    data: PathBuf,
    /// Uncertainty-ball radius δ.
    #[arg(long)]
    delta: f64,
    /// Policy to score: "bayes", "bayes-dro", or a Θ matrix CSV path.
    #[arg(long, default_value = "bayes")]
    policy: String,
    /// Environment for the named oracle policies.
    #[arg(long)]
    env: Option<EnvKind>,
    /// Cressie–Read order k (> 1); omit for the KL estimator.
    #[arg(long)]
    fdiv: Option<f64>,
    /// Monte Carlo contexts when deriving the "bayes-dro" policy.
    #[arg(long, default_value_t = 100_000)]
    oracle_mc: usize,
    /// Seed for the "bayes-dro" derivation.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LearnArgs {
    /// Logged dataset CSV (header x1..xp,action,reward,propensity).
    #[arg(long)]
    data: PathBuf,
    /// Uncertainty-ball radius δ.
    #[arg(long)]
    delta: f64,
    /// Learn the plain value-maximizing policy instead of the robust one.
    #[arg(long)]
    nonrobust: bool,
    /// Write the learned Θ matrix CSV here.
    #[arg(long)]
    out_theta: Option<PathBuf>,
    /// Also write a decision-boundary grid CSV of the learned policy.
    #[arg(long)]
    boundary: Option<PathBuf>,
    /// Grid points per axis for --boundary.
    #[arg(long, default_value_t = 201)]
    resolution: usize,
    /// Seed for the Θ initialization.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gradient step size.
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    /// Epochs per gradient run.
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    /// Softmax temperature of the smoothed objective.
    #[arg(long, default_value_t = 0.1)]
    temperature: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Environment: linear or nonlinear.
    #[arg(long, default_value_t = EnvKind::Nonlinear)]
    env: EnvKind,
    /// Uncertainty-ball radius δ.
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Training sizes, comma-separated.
    #[arg(long, value_delimiter = ',', default_values_t = vec![500usize, 1000, 1500, 2000, 2500])]
    n_grid: Vec<usize>,
    /// Test set size n′.
    #[arg(long, default_value_t = 2500)]
    n_test: usize,
    /// Replications per training size.
    #[arg(long, default_value_t = 30)]
    replications: usize,
    /// Full-scale run: raises replications to 100.
    #[arg(long)]
    full: bool,
    /// Master seed; every replication derives its own streams from it.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Stress sets per worst-mean-reward score (0 disables).
    #[arg(long, default_value_t = 100)]
    qmin_sets: usize,
    /// Rows per stress set.
    #[arg(long, default_value_t = 2500)]
    qmin_n: usize,
    /// Monte Carlo contexts for the robust oracle policy (0 disables
    /// agreement reporting).
    #[arg(long, default_value_t = 100_000)]
    oracle_mc: usize,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the aggregate table as CSV.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct BoundaryArgs {
    /// Environment: linear or nonlinear.
    #[arg(long, default_value_t = EnvKind::Linear)]
    env: EnvKind,
    /// Policy to map: "bayes", "bayes-dro", or a Θ matrix CSV path.
    #[arg(long, default_value = "bayes")]
    policy: String,
    /// Uncertainty-ball radius δ (used by "bayes-dro").
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 201)]
    resolution: usize,
    /// Monte Carlo contexts when deriving the "bayes-dro" policy.
    #[arg(long, default_value_t = 100_000)]
    oracle_mc: usize,
    /// Seed for the "bayes-dro" derivation.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
    /// Output grid CSV (columns x1,x2,action).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Environment: linear or nonlinear.
    #[arg(long, default_value_t = EnvKind::Linear)]
    env: EnvKind,
    /// Number of records (logged) or contexts (full-information).
    #[arg(long)]
    n: usize,
    /// Seed for data generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write a full-information table (x1..xp,y1..yd) instead of a logged
    /// dataset.
    #[arg(long)]
    full_info: bool,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Learn(args) => cmd_learn(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Boundary(args) => cmd_boundary(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

/// Resolves a relative output path against `DROBANDIT_OUT_DIR` when set.
fn resolve_out(path: PathBuf) -> PathBuf {
    if path.is_absolute() {
        return path;
    }
    match std::env::var_os("DROBANDIT_OUT_DIR") {
        Some(dir) if !dir.is_empty() => Path::new(&dir).join(path),
        _ => path,
    }
}

/// Builds the policy named by `--policy`: a built-in oracle or a Θ file.
fn resolve_policy(
    spec: &str,
    env: Option<EnvKind>,
    delta: f64,
    oracle_mc: usize,
    seed: u64,
) -> Result<Box<dyn Policy>> {
    let named = |kind: &str| -> Result<EnvKind> {
        env.ok_or_else(|| Error::DomainError(format!("--env is required for the \"{kind}\" policy")))
    };
    match spec.to_ascii_lowercase().as_str() {
        "bayes" => Ok(Box::new(named("bayes")?.env().bayes_oracle())),
        "bayes-dro" | "bayes_dro" | "bayesdro" => {
            let environment = named("bayes-dro")?.env();
            let (policy, _) = bayes_dro_policy(&environment, delta, oracle_mc, seed)?;
            Ok(Box::new(policy))
        }
        _ => Ok(Box::new(policy_io::read_theta_path(spec)?)),
    }
}

/// Pretty-prints a JSON report to stdout or writes it to `--out`.
fn emit_report<T: Serialize>(report: &T, out: Option<PathBuf>) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("reports serialize");
    match out {
        Some(path) => {
            let path = resolve_out(path);
            std::fs::write(&path, json + "\n")?;
            println!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateReport {
    command: &'static str,
    data: String,
    n: usize,
    num_actions: usize,
    delta: f64,
    policy: String,
    estimator: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    ipw_value: f64,
    value: f64,
    alpha: f64,
    variance: f64,
    std_error: f64,
    iterations: usize,
    converged: bool,
    boundary: bool,
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let data = LoggedDataset::from_csv_path(&args.data)?;
    let policy = resolve_policy(&args.policy, args.env, args.delta, args.oracle_mc, args.seed)?;
    let solver = SolverConfig::default();
    let curve = DualCurve::new(&data, policy.as_ref(), args.delta)?;
    let (estimator, rep) = match args.fdiv {
        Some(k) => {
            let fcurve = CressieReadCurve::new(&data, policy.as_ref(), k, args.delta)?;
            ("cressie-read", solve_fdiv(&fcurve, &solver)?)
        }
        None => ("kl", solve_dual(&curve, &solver)?),
    };
    let report = EvaluateReport {
        command: "evaluate",
        data: args.data.display().to_string(),
        n: data.n(),
        num_actions: data.num_actions(),
        delta: args.delta,
        policy: args.policy,
        estimator,
        k: args.fdiv,
        ipw_value: curve.ipw_value(),
        value: rep.value,
        alpha: rep.alpha_star,
        variance: rep.variance,
        std_error: rep.std_error,
        iterations: rep.iterations,
        converged: rep.converged,
        boundary: rep.boundary,
    };
    emit_report(&report, args.out)
}

#[derive(Serialize)]
struct LearnReport {
    command: &'static str,
    data: String,
    n: usize,
    num_actions: usize,
    delta: f64,
    robust: bool,
    value: f64,
    alpha: f64,
    std_error: f64,
    boundary: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    outer_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    restarts_used: Option<usize>,
    converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary_file: Option<String>,
}

fn cmd_learn(args: LearnArgs) -> Result<()> {
    let data = LoggedDataset::from_csv_path(&args.data)?;
    let gd = GdConfig {
        learning_rate: args.learning_rate,
        max_epochs: args.epochs,
        temperature: args.temperature,
        seed: args.seed,
        ..GdConfig::default()
    };
    let solver = SolverConfig::default();
    let (policy, eval, outer_iterations, restarts_used, converged) = if args.nonrobust {
        let (policy, diag) = learn_lin_diag(&data, &gd)?;
        let curve = DualCurve::new(&data, &policy, args.delta)?;
        let eval = solve_dual(&curve, &solver)?;
        (policy, eval, None, None, diag.converged)
    } else {
        let (policy, eval, diag) = learn_dro_with(&data, args.delta, &gd, &solver, &OuterConfig::default())?;
        (policy, eval, Some(diag.outer_iterations), Some(diag.restarts_used), diag.converged)
    };

    let theta_file = match args.out_theta {
        Some(path) => {
            let path = resolve_out(path);
            policy_io::write_theta_path(&path, &policy)?;
            Some(path.display().to_string())
        }
        None => None,
    };
    let boundary_file = match args.boundary {
        Some(path) => {
            let path = resolve_out(path);
            let grid = boundary_grid(&policy, data.p(), args.resolution)?;
            write_boundary_csv(std::fs::File::create(&path)?, &grid)?;
            Some(path.display().to_string())
        }
        None => None,
    };

    let report = LearnReport {
        command: "learn",
        data: args.data.display().to_string(),
        n: data.n(),
        num_actions: data.num_actions(),
        delta: args.delta,
        robust: !args.nonrobust,
        value: eval.value,
        alpha: eval.alpha_star,
        std_error: eval.std_error,
        boundary: eval.boundary,
        outer_iterations,
        restarts_used,
        converged,
        theta_file,
        boundary_file,
    };
    emit_report(&report, args.out)
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let spec = ExperimentSpec {
        env: args.env,
        delta: args.delta,
        n_grid: args.n_grid,
        n_test: args.n_test,
        replications: if args.full { 100 } else { args.replications },
        master_seed: args.seed,
        qmin_sets: args.qmin_sets,
        qmin_n: args.qmin_n,
        oracle_mc: args.oracle_mc,
        gd: GdConfig::default(),
        solver: SolverConfig::default(),
        outer: OuterConfig::default(),
    };
    let report = run_experiment(&spec)?;
    let failures = report.records.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        eprintln!("warning: {failures} of {} replication cells failed", report.records.len());
    }
    if let Some(path) = args.table {
        let path = resolve_out(path);
        report.write_aggregate_csv(std::fs::File::create(&path)?)?;
        println!("aggregate table written to {}", path.display());
    }
    emit_report(&report, args.out)
}

fn cmd_boundary(args: BoundaryArgs) -> Result<()> {
    let policy = resolve_policy(&args.policy, Some(args.env), args.delta, args.oracle_mc, args.seed)?;
    let grid = boundary_grid(policy.as_ref(), args.env.env().dim(), args.resolution)?;
    let path = resolve_out(args.out);
    write_boundary_csv(std::fs::File::create(&path)?, &grid)?;
    println!("boundary grid written to {}", path.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let env = args.env.env();
    let path = resolve_out(args.out);
    if args.full_info {
        let set = drobandit::sim::make_full_info_set(&env, args.n, args.seed)?;
        set.to_csv_writer(std::fs::File::create(&path)?)?;
    } else {
        let data = drobandit::sim::generate_dataset(&env, &args.env.default_table(), args.n, args.seed)?;
        data.to_csv_path(&path)?;
    }
    println!("dataset written to {}", path.display());
    Ok(())
}
