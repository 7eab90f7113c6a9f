use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wsqaoa::encoding::{alpha_min, cost_table};
use wsqaoa::harness::{
    aggregates_to_csv, depth_rows_to_csv, depth_scaling_report, execute_run, execute_run_with_trajectory,
    fit_binomial_trend, optimizer_benchmark, read_jsonl, records_to_csv, summarize_sweep, sweep_bn,
    sweep_to_csv, trend_points, variability_study, write_jsonl, BackendKind, BenchmarkConfig, RunRecord,
    RunSpec, SchemeChoice, SweepConfig, TrendInput, MAX_SWEEP_QUBITS,
};
use wsqaoa::optimizers::OptimizerKind;
use wsqaoa::portfolio::{
    hardest_budget, load_price_csv, random_instance, ProblemInstance, RandomInstanceConfig,
};
use wsqaoa::quality::{rank_solutions, RankingMode};
use wsqaoa::{Error, Result};

#[derive(Parser)]
#[command(name = "wsqaoa", version, about = "QAOA portfolio-selection experiments on an exact statevector")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or inspect problem instances.
    #[command(subcommand)]
    Instance(InstanceCommand),
    /// Print every bitstring in rank order.
    Rank(RankArgs),
    /// Run one optimization and emit its record.
    Optimize(OptimizeArgs),
    /// Depth-1 grid search over random instances for every budget.
    SweepBn(SweepArgs),
    /// Optimizer benchmark matrix with per-cell aggregates.
    Bench(BenchArgs),
    /// Best W per (n, scheme, p) from a record file.
    DepthReport(DepthArgs),
    /// Fit eta(B) = -a*C(n,B) + c to sweep records.
    FitTrend(FitArgs),
    /// Shot-noise spread of eta at optimized parameters.
    Variability(VariabilityArgs),
}

#[derive(Subcommand)]
enum InstanceCommand {
    /// Random instance, or one estimated from a price CSV.
    Gen(GenArgs),
    /// Validate an instance file and summarize it.
    Show {
        path: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    /// Number of assets (with --prices, keeps the first n tickers).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Budget B; defaults to the hardest budget for n.
    #[arg(long = "budget-assets", short = 'B')]
    budget_assets: Option<usize>,
    /// Risk appetite; random for generated instances, 0.5 for price data.
    #[arg(long)]
    lambda: Option<f64>,
    /// Estimate mu and Sigma from a date,ticker... price table.
    #[arg(long)]
    prices: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Exact,
    Shots,
}

#[derive(Clone, Copy, ValueEnum)]
enum RankingArg {
    TwoSet,
    ByViolation,
}

impl From<RankingArg> for RankingMode {
    fn from(r: RankingArg) -> Self {
        match r {
            RankingArg::TwoSet => RankingMode::TwoSet,
            RankingArg::ByViolation => RankingMode::ByViolationMagnitude,
        }
    }
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "exact")]
    backend: BackendArg,
    #[arg(long, default_value_t = 2048)]
    shots: u64,
    /// Objective evaluations per run, finite-difference probes included.
    #[arg(long, default_value_t = 500)]
    budget: usize,
    /// Append records here as JSON lines.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write a flat CSV export here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Common {
    fn backend(&self) -> BackendKind {
        match self.backend {
            BackendArg::Exact => BackendKind::Exact,
            BackendArg::Shots => BackendKind::Shots { shots: self.shots },
        }
    }
}

#[derive(Args)]
struct RankArgs {
    instance: PathBuf,
    #[arg(long, default_value = "soft-min")]
    scheme: SchemeChoice,
    #[arg(long, value_enum, default_value = "two-set")]
    mode: RankingArg,
    /// Show only the first k ranks.
    #[arg(long)]
    top: Option<usize>,
}

#[derive(Args)]
struct OptimizeArgs {
    instance: PathBuf,
    #[arg(long, default_value = "soft-min")]
    scheme: SchemeChoice,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value = "nelder-mead")]
    optimizer: OptimizerKind,
    /// Trotter step for XY mixers.
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Write the optimizer output with its full trajectory as JSON.
    #[arg(long)]
    trajectory: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    /// Register sizes, e.g. --n 2 --n 3 or --n 2,3,4.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    instances: usize,
    #[arg(long, default_value = "soft-100")]
    scheme: SchemeChoice,
    /// Fix lambda instead of drawing it per instance.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = MAX_SWEEP_QUBITS)]
    max_qubits: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// Register sizes of the random instances.
    #[arg(long, value_delimiter = ',', default_value = "3")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    instances: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long = "scheme", value_delimiter = ',', default_value = "soft-min")]
    schemes: Vec<SchemeChoice>,
    #[arg(long = "optimizer", value_delimiter = ',', default_value = "nelder-mead,powell,gd,adam,random")]
    optimizers: Vec<OptimizerKind>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    p: Vec<usize>,
    /// Fix lambda instead of drawing it per instance.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long, default_value_t = MAX_SWEEP_QUBITS)]
    max_qubits: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct DepthArgs {
    records: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    records: PathBuf,
    #[arg(long)]
    n: usize,
    /// Fit every record instead of the per-budget means.
    #[arg(long)]
    per_instance: bool,
}

#[derive(Args)]
struct VariabilityArgs {
    instance: PathBuf,
    #[arg(long, default_value = "soft-min")]
    scheme: SchemeChoice,
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Optimizer used (on the exact backend) to fix the parameters.
    #[arg(long, default_value = "grid")]
    optimizer: OptimizerKind,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "shots")]
    backend: BackendArg,
    #[arg(long, default_value_t = 2048)]
    shots: u64,
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn load_instance(path: &Path) -> Result<ProblemInstance> {
    ProblemInstance::from_json(&read(path)?)
}

fn load_records(path: &Path) -> Result<Vec<RunRecord>> {
    read_jsonl(&read(path)?)
}

fn append_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    write_jsonl(std::io::BufWriter::new(file), records)
}

fn emit(common: &Common, records: &[RunRecord]) -> Result<()> {
    if let Some(out) = &common.out {
        append_records(out, records)?;
    }
    if let Some(csv) = &common.csv {
        fs::write(csv, records_to_csv(records)?)?;
    }
    Ok(())
}

fn bits(l: usize, n: usize) -> String {
    (0..n).map(|i| if l >> i & 1 == 1 { '1' } else { '0' }).collect()
}

fn instance_gen(args: &GenArgs) -> Result<()> {
    let instance = match &args.prices {
        Some(path) => {
            let mut series = load_price_csv(&read(path)?)?;
            if let Some(n) = args.n {
                series = series.truncate_tickers(n)?;
            }
            let n = series.columns();
            let budget = args.budget_assets.unwrap_or_else(|| hardest_budget(n));
            ProblemInstance::from_prices(&series, budget, args.lambda.unwrap_or(0.5))?
        }
        None => {
            let n = args
                .n
                .ok_or_else(|| Error::InvalidArgument("--n is required without --prices".into()))?;
            let cfg = RandomInstanceConfig {
                budget: args.budget_assets,
                lambda: args.lambda,
                ..Default::default()
            };
            random_instance(n, args.seed, &cfg)?
        }
    };
    let json = instance.to_json()?;
    match &args.out {
        Some(path) => fs::write(path, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn instance_show(path: &Path) -> Result<()> {
    let instance = load_instance(path)?;
    let alpha = alpha_min(&instance)?;
    let table = cost_table(&instance, &wsqaoa::encoding::ConstraintScheme::HardDickeComplete)?;
    let best = table.best_viable().expect("validated instances have viable bitstrings");
    println!("n = {}, B = {}, lambda = {}", instance.n, instance.budget, instance.lambda);
    println!("viable bitstrings: {} of {}", table.viable_count(), table.dim());
    println!("best viable: {} (cost {:.6e})", bits(best, instance.n), table.costs[best]);
    println!("alpha_min = {alpha:.6e}");
    Ok(())
}

fn rank(args: &RankArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let scheme = args.scheme.resolve(&instance, 0)?;
    let table = cost_table(&instance, &scheme)?;
    let ranking = rank_solutions(&table, args.mode.into());
    println!("rank,bitstring,weight,objective,cost");
    let limit = args.top.unwrap_or(usize::MAX);
    for (r, l) in ranking.sequence().into_iter().enumerate().take(limit) {
        println!(
            "{r},{},{},{},{}",
            bits(l, table.n),
            l.count_ones(),
            table.objective[l],
            table.costs[l]
        );
    }
    Ok(())
}

fn optimize(args: &OptimizeArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let mut spec = RunSpec::new(instance, args.scheme, args.p, args.optimizer, args.common.seed);
    spec.backend = args.common.backend();
    spec.budget = args.common.budget;
    spec.trotter_eps = args.eps;
    let (record, result) = execute_run_with_trajectory(&spec)?;
    if let Some(path) = &args.trajectory {
        fs::write(path, result.to_json()?)?;
    }
    emit(&args.common, std::slice::from_ref(&record))?;
    println!("{}", serde_json::to_string_pretty(&record).map_err(Error::from)?);
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let mut cfg = SweepConfig::new(args.n.clone(), args.instances, args.common.seed, args.scheme);
    cfg.lambda = args.lambda;
    cfg.max_qubits = args.max_qubits;
    let records = sweep_bn(&cfg)?;
    emit(&args.common, &records)?;
    print!("{}", sweep_to_csv(&summarize_sweep(&records))?);
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let mut instances = Vec::new();
    for &n in &args.n {
        for i in 0..args.instances {
            let seed = args.common.seed.wrapping_add(1000 * n as u64 + i as u64);
            let cfg = RandomInstanceConfig {
                lambda: args.lambda,
                ..Default::default()
            };
            instances.push((random_instance(n, seed, &cfg)?, Some(seed)));
        }
    }
    let mut cfg = BenchmarkConfig::new(instances, args.common.seed);
    cfg.schemes = args.schemes.clone();
    cfg.depths = args.p.clone();
    cfg.optimizers = args.optimizers.clone();
    cfg.repeats = args.repeats;
    cfg.backends = vec![args.common.backend()];
    cfg.budget = args.common.budget;
    cfg.trotter_eps = args.eps;
    cfg.max_qubits = args.max_qubits;
    let out = optimizer_benchmark(&cfg)?;
    emit(&args.common, &out.records)?;
    print!("{}", aggregates_to_csv(&out.aggregates)?);
    Ok(())
}

fn depth_report(args: &DepthArgs) -> Result<()> {
    let rows = depth_scaling_report(&load_records(&args.records)?);
    let csv = depth_rows_to_csv(&rows)?;
    if let Some(path) = &args.csv {
        fs::write(path, &csv)?;
    }
    print!("{csv}");
    Ok(())
}

fn fit_trend(args: &FitArgs) -> Result<()> {
    let input = if args.per_instance {
        TrendInput::PerInstance
    } else {
        TrendInput::Means
    };
    let points = trend_points(&load_records(&args.records)?, args.n, input);
    let fit = fit_binomial_trend(&points, args.n)?;
    println!("{}", serde_json::to_string_pretty(&fit).map_err(Error::from)?);
    Ok(())
}

fn variability(args: &VariabilityArgs) -> Result<()> {
    let instance = load_instance(&args.instance)?;
    let spec = RunSpec::new(instance, args.scheme, args.p, args.optimizer, args.seed);
    let record = execute_run(&spec)?;
    let backend = match args.backend {
        BackendArg::Exact => BackendKind::Exact,
        BackendArg::Shots => BackendKind::Shots { shots: args.shots },
    };
    let report = variability_study(
        &spec.instance,
        record.resolved_scheme,
        &record.best_params,
        backend,
        args.repeats,
        args.seed,
    )?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Instance(InstanceCommand::Gen(args)) => instance_gen(args),
        Command::Instance(InstanceCommand::Show { path }) => instance_show(path),
        Command::Rank(args) => rank(args),
        Command::Optimize(args) => optimize(args),
        Command::SweepBn(args) => sweep(args),
        Command::Bench(args) => bench(args),
        Command::DepthReport(args) => depth_report(args),
        Command::FitTrend(args) => fit_trend(args),
        Command::Variability(args) => variability(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Io(_) => ExitCode::FAILURE,
                _ => ExitCode::from(2),
            }
        }
    }
}
