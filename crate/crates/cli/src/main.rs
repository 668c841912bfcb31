//! `icx`: intervention complexity and agent evaluation from the command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 unparsable input, 3 domain error
//! (bad index, unknown agent, empty ensemble), 4 a budgeted result under
//! `--strict`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "icx", version, about = "Intervention complexity of state transitions")]
struct Cli {
    /// Worker threads for all-pairs and ensemble work (1 runs sequentially).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// IC of one pair, or of every pair when --from/--to are omitted (JSON lines).
    Ic(IcArgs),
    /// Competence curve of an agent (CSV) and its scalar competence (JSON).
    Curve(CurveArgs),
    /// Regret trace of an agent under an evaluation scheme (CSV).
    Regret(RegretArgs),
    /// Proxy-weighted learning efficiency over an ensemble (JSON).
    Efficiency(EfficiencyArgs),
    /// Bare and oracle IC and knowledge cost of gated corridors (CSV).
    CorridorDemo(CorridorDemoArgs),
    /// Emit a gated corridor environment file.
    GatedCorridor(GatedCorridorArgs),
    /// Emit a seeded random environment file.
    RandomEnv(RandomEnvArgs),
    /// Emit a single-action cycle environment file.
    CycleEnv(CycleEnvArgs),
    /// Emit a clamped grid environment file.
    GridEnv(GridEnvArgs),
    /// Decode and pretty-print a program.
    Disasm(DisasmArgs),
    /// Check identity, non-negativity, the triangle inequality and asymmetry (JSON).
    Quasimetric(QuasimetricArgs),
    /// Summary of an environment file (JSON).
    Info(InfoArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BiasKind {
    Action,
    Pl,
    Comb,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RegimeArg {
    Bare,
    Oracle,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum SchemeArg {
    #[value(name = "A", alias = "a")]
    A,
    #[value(name = "B", alias = "b")]
    B,
    #[value(name = "C", alias = "c")]
    C,
}

#[derive(Args, Debug, Clone)]
struct BiasArgs {
    #[arg(long, value_enum, default_value = "action")]
    bias: BiasKind,
    #[arg(long, value_enum, default_value = "bare")]
    regime: RegimeArg,
    /// Weight on program bits under --bias comb.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Weight on output length under --bias comb.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = ic_core::engine::DEFAULT_MAX_BITS)]
    max_bits: usize,
    #[arg(long, default_value_t = ic_core::vm::DEFAULT_STEP_BUDGET)]
    step_budget: usize,
}

#[derive(Args, Debug)]
struct IcArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long, requires = "to")]
    from: Option<usize>,
    #[arg(long, requires = "from")]
    to: Option<usize>,
    #[command(flatten)]
    bias: BiasArgs,
    /// Exit with status 4 if any result is only exact up to the budget.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[arg(long, conflicts_with = "ensemble_dir", required_unless_present = "ensemble_dir")]
    env: Option<PathBuf>,
    /// Directory of `.env` files, combined with proxy weights.
    #[arg(long)]
    ensemble_dir: Option<PathBuf>,
    #[arg(long)]
    agent: String,
    #[command(flatten)]
    bias: BiasArgs,
    /// Scheme-C tasks the agent runs before its curve is measured.
    #[arg(long, default_value_t = 0)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix: writes `<out>.csv` and `<out>.json` instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RegretArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long)]
    agent: String,
    #[arg(long, value_enum)]
    scheme: SchemeArg,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 0.95)]
    discount: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    bias: BiasArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EfficiencyArgs {
    #[arg(long, conflicts_with = "ensemble_dir", required_unless_present = "ensemble_dir")]
    env: Option<PathBuf>,
    #[arg(long)]
    ensemble_dir: Option<PathBuf>,
    #[arg(long)]
    agent: String,
    #[arg(long, value_enum, default_value = "B")]
    scheme: SchemeArg,
    #[arg(long)]
    horizon: usize,
    #[arg(long, default_value_t = 0.95)]
    discount: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    bias: BiasArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CorridorDemoArgs {
    /// Corridor lengths.
    #[arg(long, value_delimiter = ',', default_values_t = [2, 4, 6, 8, 10])]
    n_list: Vec<usize>,
    /// Random strings per length.
    #[arg(long, default_value_t = 3)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumeration bound; defaults to 2n + 8 per row.
    #[arg(long)]
    max_bits: Option<usize>,
    #[arg(long, default_value_t = ic_core::vm::DEFAULT_STEP_BUDGET)]
    step_budget: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GatedCorridorArgs {
    /// Binary string spelled by the corridor.
    #[arg(long)]
    x: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RandomEnvArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CycleEnvArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GridEnvArgs {
    #[arg(long)]
    w: usize,
    #[arg(long)]
    h: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DisasmArgs {
    /// Program bits, e.g. `0b0100100`.
    program: String,
    /// Environment whose dimensions fix the field widths.
    #[arg(long, conflicts_with_all = ["states", "actions"])]
    env: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    states: usize,
    #[arg(long, default_value_t = 2)]
    actions: usize,
}

#[derive(Args, Debug)]
struct QuasimetricArgs {
    #[arg(long)]
    env: PathBuf,
    #[command(flatten)]
    bias: BiasArgs,
    /// Allowed triangle excess; defaults to 0 for action count and 8 otherwise.
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InfoArgs {
    #[arg(long)]
    env: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("icx: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = commands::configure_jobs(cli.jobs)?;
    match cli.command {
        Command::Ic(a) => commands::ic(a, exec),
        Command::Curve(a) => commands::curve(a, exec),
        Command::Regret(a) => commands::regret(a, exec),
        Command::Efficiency(a) => commands::efficiency(a, exec),
        Command::CorridorDemo(a) => commands::corridor_demo(a, exec),
        Command::GatedCorridor(a) => commands::gated_corridor(a),
        Command::RandomEnv(a) => commands::random_env(a),
        Command::CycleEnv(a) => commands::cycle_env(a),
        Command::GridEnv(a) => commands::grid_env(a),
        Command::Disasm(a) => commands::disasm(a),
        Command::Quasimetric(a) => commands::quasimetric(a, exec),
        Command::Info(a) => commands::info(a),
    }
}
