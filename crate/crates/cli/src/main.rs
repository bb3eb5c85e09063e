//! `penreg`: backtests penalised day-ahead price models from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use penreg_core::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "penreg", version, about = "Penalised regression backtests for day-ahead electricity prices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rolling-window backtest of one model; writes forecasts, scores, traces and a manifest.
    Run(RunArgs),
    /// Tabulates RMSE and rRMSE of finished runs against their OLS baseline.
    Compare(CompareArgs),
    /// Dumps (beta, g(beta)) samples of every penalty family as CSV.
    PenaltyCurves(CurveArgs),
    /// Writes a seeded synthetic market CSV with a known sparse price model.
    Synth(SynthArgs),
}

#[derive(Args, Default)]
pub struct RunArgs {
    /// Flat `key = value` file; flags take precedence over its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Market CSV with columns date,hour,price,load,...
    #[arg(long)]
    pub data: Option<String>,
    /// epex | omie
    #[arg(long)]
    pub market: Option<String>,
    /// arx | farx
    #[arg(long)]
    pub model: Option<String>,
    /// ols | alasso | classo | cpf | en | flash | lasso | lq | mcplus | ridge | scad
    #[arg(long)]
    pub penalty: Option<String>,
    /// cv | bic
    #[arg(long)]
    pub select: Option<String>,
    /// Shape value from the family's grid, or `cv` to select it jointly with lambda.
    #[arg(long)]
    pub shape: Option<String>,
    /// Calibration window in days.
    #[arg(long)]
    pub window: Option<String>,
    /// First forecast day (YYYY-MM-DD).
    #[arg(long)]
    pub from: Option<String>,
    /// Last forecast day (YYYY-MM-DD).
    #[arg(long)]
    pub to: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<String>,
    /// Worker threads for the 24 hourly models.
    #[arg(long)]
    pub jobs: Option<String>,
    /// Recorded in the manifest; the pipeline itself is deterministic.
    #[arg(long)]
    pub seed: Option<String>,
    /// Largest lambda of the search grid.
    #[arg(long)]
    pub lambda_max: Option<String>,
    /// Re-select the penalty every k forecast days, refitting in between.
    #[arg(long)]
    pub reselect_every: Option<String>,
    /// pooled | per-hour
    #[arg(long)]
    pub ecdf: Option<String>,
    /// Cross-validation folds.
    #[arg(long)]
    pub folds: Option<String>,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Run directories, or directories containing run directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv | json
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    pub format: String,
}

#[derive(Args)]
pub struct CurveArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Curves are sampled on [-beta_max, beta_max].
    #[arg(long, default_value_t = 3.0)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 301)]
    pub points: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "epex")]
    pub market: String,
    #[arg(long, default_value = "2019-01-01")]
    pub start: String,
    #[arg(long, default_value_t = 1000)]
    pub days: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Standard deviation of the latent price noise.
    #[arg(long, default_value_t = 0.5)]
    pub noise: f64,
    /// Skip the missing/doubled clock-change hours.
    #[arg(long)]
    pub no_dst: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn stage(err: &Error) -> &'static str {
    match err.root() {
        Error::Parse { .. } | Error::Schema(_) => "ingest",
        Error::DegenerateSample(_) => "transform",
        Error::InvalidSpec(_) => "penalties",
        Error::Numeric(_) => "solver",
        Error::Coverage(_) => "metrics",
        Error::Config(_) => "config",
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => "io",
        Error::Data(_) | Error::AtForecast { .. } => "data",
    }
}

fn hint(kind: ErrorKind) -> &'static str {
    match kind {
        ErrorKind::Config => "check the flags or config file; see `penreg run --help`",
        ErrorKind::Data => "check that the input file exists, has the market's columns, and covers the window plus forecast range",
        ErrorKind::Numeric => "try a longer window, a different penalty, or a smaller --lambda-max",
    }
}

fn report(err: &Error) -> ExitCode {
    let kind = err.kind();
    eprintln!("error: {err}");
    eprintln!("  kind: {}", format!("{kind:?}").to_lowercase());
    eprintln!("  stage: {}", stage(err));
    if let Error::AtForecast { day, hour, .. } = err {
        eprintln!("  at: {day} hour {hour}");
    }
    eprintln!("  hint: {}", hint(kind));
    ExitCode::from(match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Numeric => 4,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Compare(args) => commands::compare(&args),
        Command::PenaltyCurves(args) => commands::penalty_curves(&args),
        Command::Synth(args) => commands::synth(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
