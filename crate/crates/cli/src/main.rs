use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glycast_cli::{init_threads, run, Command, Overrides};

#[derive(Parser)]
#[command(name = "glycast", version, about = "Glucose forecasting pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset directory.
    Synth(Common),
    /// Clean, impute and encode the clinical table; build meal regressors.
    Preprocess(Common),
    /// Learn the Bayesian network and its arc strengths.
    Learn(Common),
    /// Rolling forecasts at one prediction horizon.
    Forecast(Common),
    /// Sliding-window evaluation at every configured horizon.
    Evaluate(Common),
    /// Baseline plus one row per removed component.
    Ablate(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prediction horizon in minutes.
    #[arg(long, value_parser = ["15", "30", "45", "60"])]
    horizon: Option<String>,
    /// Comma-separated subject ids.
    #[arg(long, value_delimiter = ',')]
    subjects: Option<Vec<String>>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Synth(c) => (Command::Synth, c),
        Cmd::Preprocess(c) => (Command::Preprocess, c),
        Cmd::Learn(c) => (Command::Learn, c),
        Cmd::Forecast(c) => (Command::Forecast, c),
        Cmd::Evaluate(c) => (Command::Evaluate, c),
        Cmd::Ablate(c) => (Command::Ablate, c),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out,
        horizon_minutes: common.horizon.map(|h| h.parse().expect("validated by clap")),
        subjects: common.subjects,
    };
    let result = init_threads().and_then(|()| run(command, &common.config, &overrides));
    match result {
        Ok(m) => {
            log::info!("{} finished in {:.1}s, {} outputs", m.command, m.duration_secs, m.outputs.len());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
