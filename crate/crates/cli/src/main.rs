mod commands;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit codes shared by every subcommand.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const BUG_FOUND: u8 = 10;
    pub const PARTIAL_METRICS: u8 = 11;
}

#[derive(Parser)]
#[command(name = "guidefuzz", version, about = "Stateful contract fuzzer with externally scored power scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one fuzzing campaign and write report.json, coverage.csv and manifest.json.
    Run(RunArgs),
    /// Query the LLM endpoint (or replay a cassette, or validate a fixture) and write a metrics bundle.
    FetchMetrics(FetchArgs),
    /// Print or write the static summary of the sources.
    Static(StaticArgs),
    /// Paired-seed comparison of Baseline, L-C, L-V, L-S and full guidance.
    Ablate(AblateArgs),
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Metrics bundle to use instead of querying an endpoint.
    #[arg(long, value_name = "PATH")]
    metrics_fixture: Option<std::path::PathBuf>,
    #[arg(long, value_name = "URL")]
    llm_endpoint: Option<String>,
    #[arg(long, value_name = "NAME")]
    llm_model: Option<String>,
    /// Comma-separated, e.g. 0.9,0.95,1
    #[arg(long, value_name = "LIST")]
    temperatures: Option<String>,
    /// Comma-separated subset of complexity,vuln,seq,invariant; empty for the baseline.
    #[arg(long, value_name = "LIST")]
    producers: Option<String>,
    #[arg(long = "energy-A", value_name = "A")]
    energy_a: Option<f64>,
    #[arg(long = "energy-B", value_name = "B")]
    energy_b: Option<f64>,
    #[arg(long, value_name = "N")]
    energy_cap: Option<f64>,
    #[arg(long, value_name = "N")]
    base_energy: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "N")]
    max_execs: Option<u64>,
    /// Virtual-time budget in seconds.
    #[arg(long, value_name = "SECS")]
    time_budget: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_name = "PATH")]
    config: std::path::PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct FetchArgs {
    #[arg(long, value_name = "PATH")]
    config: std::path::PathBuf,
    #[command(flatten)]
    overrides: Overrides,
    /// Replay this cassette instead of calling the endpoint.
    #[arg(long, value_name = "PATH")]
    cassette: Option<std::path::PathBuf>,
    /// Save the live exchange as a cassette.
    #[arg(long, value_name = "PATH")]
    record: Option<std::path::PathBuf>,
    /// Where to write the bundle.
    #[arg(long, value_name = "PATH", default_value = "metrics.json")]
    out: std::path::PathBuf,
}

#[derive(Args)]
struct StaticArgs {
    /// MiniSol source files.
    #[arg(required = true)]
    sources: Vec<std::path::PathBuf>,
    /// Write the JSON summary here (`-` for stdout).
    #[arg(long, value_name = "PATH", default_value = "-")]
    dump_static: String,
}

#[derive(Args)]
struct AblateArgs {
    /// One or more campaign configs; each needs a metrics fixture.
    #[arg(long = "config", value_name = "PATH", required = true)]
    configs: Vec<std::path::PathBuf>,
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, default_value_t = 1)]
    first_seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Also write per-seed results as JSON.
    #[arg(long, value_name = "PATH")]
    json: Option<std::path::PathBuf>,
    #[arg(long, value_name = "SECS")]
    time_budget: Option<f64>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::FetchMetrics(a) => commands::fetch(a),
        Command::Static(a) => commands::static_summary(a),
        Command::Ablate(a) => commands::ablate(a),
    };
    ExitCode::from(code)
}
