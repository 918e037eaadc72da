mod commands;
mod error;
mod manifest;

use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Generalized-entropy recurrence prediction: synthetic cohorts, training,
/// alpha sweeps and reports.
///
/// Exit codes: 0 success, 2 usage or invalid configuration, 3 missing or
/// corrupt files, 4 numerical failure during training. Set THC_LOG to
/// error, info or debug for progress logging on stderr.
#[derive(Debug, Parser)]
#[command(name = "thc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic cohort (volumes + cohort.csv).
    GenData(GenDataArgs),
    /// Train one model on a whole cohort.
    Train(TrainArgs),
    /// Cross-validate a grid of alpha values against the Shannon baseline.
    Sweep(SweepArgs),
    /// Re-render a stored sweep CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// head-neck-like, lung-like or separable.
    #[arg(long, default_value = "head-neck-like")]
    pub preset: String,
    /// Number of patients (defaults to the preset's size).
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Volume size as H, HxW or HxWxC.
    #[arg(long)]
    pub size: Option<String>,
    /// Override the preset's signal strength.
    #[arg(long)]
    pub signal: Option<f64>,
    /// Override the preset's label-flip probability.
    #[arg(long)]
    pub label_noise: Option<f64>,
}

/// Model and optimisation flags shared by `train` and `sweep`.
#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Prediction loss: thc or shannon.
    #[arg(long)]
    pub loss: Option<String>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    /// Encoder channel widths, one per level, e.g. 8,16,32.
    #[arg(long)]
    pub channels: Option<String>,
    /// Hidden widths of the prediction head, e.g. 16 (empty for none).
    #[arg(long)]
    pub dense: Option<String>,
    #[arg(long)]
    pub rec_weight: Option<f64>,
    #[arg(long)]
    pub pred_weight: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Cohort directory (or `data` in the config file).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Alpha grid as start:stop:step, inclusive.
    #[arg(long, conflicts_with = "alphas")]
    pub grid: Option<String>,
    /// Alpha grid as a comma-separated list.
    #[arg(long)]
    pub alphas: Option<String>,
    /// TOML sweep configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Maximum number of folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    pub parallel_folds: usize,
    /// Significance test: welch, student or paired.
    #[arg(long)]
    pub test: Option<String>,
    /// Number of folds.
    #[arg(long)]
    pub k: Option<usize>,
    /// Base seed of the split and of every fold.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sweep CSV written by `thc sweep`.
    #[arg(long)]
    pub input: PathBuf,
    /// markdown or csv.
    #[arg(long, default_value = "markdown")]
    pub format: String,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Writes through a temporary sibling so that readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = std::fs::File::create(&tmp)
        .and_then(|mut f| f.write_all(bytes))
        .and_then(|()| std::fs::rename(&tmp, path));
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("THC_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(&a),
        Command::Train(a) => commands::train(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
