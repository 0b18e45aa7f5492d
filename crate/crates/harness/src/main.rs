use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use riloss_harness::{apply_overrides, run, Command, HarnessError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "riloss", version, about = "Residual-informed loss experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train one forecaster and report plain test MSE / MAE.
    Train(Common),
    /// Compare the four training losses on shared data and seeds.
    Ablation(Common),
    /// Train MSE and RI at each input SNR.
    Robustness(Common),
    /// Friedman test and Nemenyi critical difference of a metric table.
    Friedman {
        #[command(flatten)]
        common: Common,
        /// CSV: setting label, then one metric column per method.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// MSE / HSIC / RI against the fraction of noisy points.
    Tradeoff(Common),
    /// Monte-Carlo check of the expected residual-noise cross term.
    Crossterm(Common),
    /// HSIC convergence and generalization-bound terms.
    Bounds(Common),
    /// Every loss on every horizon × SNR × seed cell.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated SNR values in dB.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr: Option<Vec<f64>>,
    /// Independent runs per setting (seeds seed, seed+1, ...).
    #[arg(long)]
    repeats: Option<usize>,
    /// Confirms that benchmark datasets were obtained separately.
    #[arg(long)]
    acknowledge_datasets: bool,
}

fn execute(cli: Cli) -> Result<serde_json::Value, HarnessError> {
    let (command, common, table) = match cli.command {
        Cmd::Train(c) => (Command::Train, c, None),
        Cmd::Ablation(c) => (Command::Ablation, c, None),
        Cmd::Robustness(c) => (Command::Robustness, c, None),
        Cmd::Friedman { common, table } => (Command::Friedman, common, table),
        Cmd::Tradeoff(c) => (Command::Tradeoff, c, None),
        Cmd::Crossterm(c) => (Command::Crossterm, c, None),
        Cmd::Bounds(c) => (Command::Bounds, c, None),
        Cmd::Sweep(c) => (Command::Sweep, c, None),
    };
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let overrides = Overrides {
        seed: common.seed,
        out: common.out,
        snr: common.snr,
        repeats: common.repeats,
        table,
        acknowledge_datasets: common.acknowledge_datasets,
    };
    apply_overrides(&mut cfg, command, &overrides)?;
    run(command, &cfg, overrides.acknowledge_datasets)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = HarnessError::new("usage", None, e.render().to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(summary) => {
            // a closed pipe (e.g. `| head`) is not a failure of the run
            let _ = writeln!(std::io::stdout(), "{summary}");
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::FAILURE
        }
    }
}
