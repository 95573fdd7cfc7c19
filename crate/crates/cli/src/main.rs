mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "supplyplan",
    version,
    about = "Vehicle-booking supply planning under demand and cost uncertainty"
)]
struct Cli {
    /// Worker threads for the parallel sweeps (default: one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model and write solution.json.
    Solve(SolveArgs),
    /// Rolling comparison of the methods against wait-and-see.
    Compare(CompareArgs),
    /// Write a seeded synthetic instance with scenario files.
    Gen(GenArgs),
    /// SP optimum for growing numbers of sampled scenarios.
    Stability(StabilityArgs),
    /// Realized costs of the plans over random draws.
    Montecarlo(MonteCarloArgs),
    /// Expected value of perfect information.
    Evpi(EvpiArgs),
    /// Realized costs of the plans at the extreme demand and cost.
    Stress(StressArgs),
}

#[derive(Args)]
pub(crate) struct DataArgs {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    /// Scenario demands, one column per destination id.
    #[arg(long, alias = "scenarios")]
    demand_csv: PathBuf,
    /// Scenario buying costs. When absent, every scenario uses b̄, or draws
    /// uniformly on b̄(1 ± σ) if --sigma is given.
    #[arg(long)]
    cost_csv: Option<PathBuf>,
    /// Relative spread σ of the buying costs [default: 0.2 for Monte Carlo
    /// draws, the stress point and the sigma cost band].
    #[arg(long)]
    sigma: Option<f64>,
    /// Seed for every random draw.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
pub(crate) struct OmegaArgs {
    /// Radius Ω of the cost ellipsoid.
    #[arg(long, conflicts_with = "epsilon")]
    omega: Option<f64>,
    /// Violation probability ε; sets Ω = sqrt(−2 ln ε).
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
pub(crate) struct SolveOpts {
    /// Continuous bookings and vehicle counts (default).
    #[arg(long, conflicts_with = "integer")]
    relax: bool,
    /// Integer bookings and vehicle counts.
    #[arg(long)]
    integer: bool,
    /// How scenario-indexed models are solved.
    #[arg(long, value_enum, default_value_t = StrategyArg::Auto)]
    strategy: StrategyArg,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum StrategyArg {
    Auto,
    Monolithic,
    Decomposed,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum ModelArg {
    Sp,
    RoBox,
    RoEll,
    Trsocp,
    Ws,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum CostBandArg {
    /// Mean and largest deviation of the scenario costs.
    Prefix,
    /// b̄ ± σ b̄ from the instance.
    Sigma,
}

#[derive(Clone, Copy, ValueEnum)]
pub(crate) enum GammaModeArg {
    /// Spread relative to the mean demand.
    Relative,
    /// Spread in demand units, used as a multiplier.
    Absolute,
}

#[derive(Args)]
pub(crate) struct SolveArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    model: ModelArg,
    #[command(flatten)]
    omega: OmegaArgs,
    #[command(flatten)]
    opts: SolveOpts,
    /// Number of leading scenarios to use (default: all).
    #[arg(long)]
    tau: Option<usize>,
    /// Scenario (1-based) realized for `ws`.
    #[arg(long, default_value_t = 1)]
    scenario: usize,
    /// Cost box for ro-box, ro-ell and trsocp.
    #[arg(long, value_enum, default_value_t = CostBandArg::Prefix)]
    cost_band: CostBandArg,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
pub(crate) struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Report columns among m1..m5 and ws.
    #[arg(long, default_value = "m1,m2,m3,m4,m5,ws")]
    methods: String,
    /// First prefix length of the sweep (default: half the scenarios).
    #[arg(long)]
    sbar: Option<usize>,
    #[command(flatten)]
    omega: OmegaArgs,
    #[command(flatten)]
    opts: SolveOpts,
    #[arg(long, value_enum, default_value_t = CostBandArg::Prefix)]
    cost_band: CostBandArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
pub(crate) struct GenArgs {
    #[arg(long, default_value_t = 24)]
    suppliers: usize,
    #[arg(long, default_value_t = 15)]
    destinations: usize,
    #[arg(long, default_value_t = 48)]
    scenarios: usize,
    /// Relative spread σ of the sampled costs.
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Vehicle capacity in tons.
    #[arg(long, default_value_t = 31.0)]
    q: f64,
    /// Cancellation refund fraction.
    #[arg(long, default_value_t = 0.7)]
    alpha: f64,
    /// Give the last destination a capacity far above the others.
    #[arg(long)]
    outlier_capacity: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
pub(crate) struct StabilityArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Increasing scenario counts.
    #[arg(long, default_value = "50,100,200")]
    s_list: String,
    #[command(flatten)]
    opts: SolveOpts,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
pub(crate) struct PlanArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "m1,m2,m3,m4,m5,ws")]
    methods: String,
    /// Scenarios used to build the plans (default: all).
    #[arg(long)]
    tau: Option<usize>,
    #[command(flatten)]
    omega: OmegaArgs,
    #[command(flatten)]
    opts: SolveOpts,
    #[arg(long, value_enum, default_value_t = CostBandArg::Prefix)]
    cost_band: CostBandArg,
    /// How the demand spread γ is measured.
    #[arg(long, value_enum, default_value_t = GammaModeArg::Relative)]
    gamma_mode: GammaModeArg,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
pub(crate) struct MonteCarloArgs {
    #[command(flatten)]
    plan: PlanArgs,
    /// Number of draws.
    #[arg(long, default_value_t = 1000)]
    n: usize,
}

#[derive(Args)]
pub(crate) struct StressArgs {
    #[command(flatten)]
    plan: PlanArgs,
}

#[derive(Args)]
pub(crate) struct EvpiArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    opts: SolveOpts,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.jobs {
        if n == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match cli.command {
        Command::Solve(a) => commands::solve(a),
        Command::Compare(a) => commands::compare(a),
        Command::Gen(a) => commands::gen(a),
        Command::Stability(a) => commands::stability(a),
        Command::Montecarlo(a) => commands::montecarlo(a),
        Command::Evpi(a) => commands::evpi(a),
        Command::Stress(a) => commands::stress(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
