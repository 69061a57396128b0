//! Command-line front end. Exit codes: 0 success, 2 usage error, 3 data or
//! schema error, 4 numeric failure.

mod commands;

pub use commands::{export_synth_dataset, PipelineConfig};

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::consensus::ExclusionPolicy;
use crate::dsp::DspError;
use crate::edf::EdfError;
use crate::eval::EvalError;
use crate::hypno::HypnoError;
use crate::reportio::ReportioError;
use crate::review::ReviewError;
use crate::stager::StagerError;
use crate::synth::SynthError;
use crate::uncertainty::{UncertaintyError, UncertaintyMetric};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error!(EdfError, HypnoError, ReportioError, ReviewError);

impl From<DspError> for CliError {
    fn from(e: DspError) -> Self {
        match e {
            DspError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            DspError::DegenerateSignal { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<StagerError> for CliError {
    fn from(e: StagerError) -> Self {
        match e {
            StagerError::NonFiniteLoss { .. } => CliError::Numeric(e.to_string()),
            StagerError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            StagerError::Dsp(d) => d.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::AllExcluded { .. } | EvalError::EmptyMatrix => CliError::Numeric(e.to_string()),
            EvalError::InvalidFraction(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<UncertaintyError> for CliError {
    fn from(e: UncertaintyError) -> Self {
        match e {
            UncertaintyError::InvalidFraction(_) | UncertaintyError::UnknownMetric(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            SynthError::Hypno(h) => h.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "somnogray", version, about = "Gray-area mapping and review for automatic sleep staging")]
pub struct Cli {
    /// Log more detail (-v info, -vv debug); logs go to stderr
    #[arg(short, long, action = ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect EDF files
    #[command(subcommand)]
    Edf(EdfCommand),
    /// Band-pass, resample, normalize and epoch EDF channels
    Preprocess(PreprocessArgs),
    /// Train the spectral softmax stager on labelled recordings
    Train(TrainArgs),
    /// Produce an ensemble hypnodensity from signals, features or external hypnodensities
    Stage(StageArgs),
    /// Per-epoch uncertainty values of a hypnodensity
    Uncertainty(UncertaintyArgs),
    /// Select gray epochs by rank or threshold
    Gray(GrayArgs),
    /// Majority-vote hypnogram of a scorer panel
    Consensus(ConsensusArgs),
    /// Agreement report between a reference and a prediction
    Eval(EvalArgs),
    /// Exclusion and capture curves over a dataset, with SVG figures
    Curve(CurveArgs),
    /// Gray-area agreement between a scorer panel and a model
    Agreement(AgreementArgs),
    /// Write a seeded synthetic dataset
    Synth(SynthArgs),
    /// Run the review service
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum EdfCommand {
    /// Print a header summary
    Info {
        /// EDF file to inspect
        file: PathBuf,
    },
}

fn parse_metric(s: &str) -> Result<UncertaintyMetric, String> {
    s.parse().map_err(|_| format!("unknown metric {s:?}; expected one of ul, um, ur, uu, ue"))
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    /// Input EDF file
    pub edf: PathBuf,
    /// Comma-separated channel labels (default: every signal channel)
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<String>,
    /// Output directory for <label>.epochs.json files
    #[arg(short, long)]
    pub output: PathBuf,
    /// Pipeline config (TOML with [preprocess] and optional channels)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recording id written into the outputs (default: file stem)
    #[arg(long)]
    pub recording_id: Option<String>,
    /// Also write <label>.features.json with the stager features
    #[arg(long)]
    pub features: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset directory: one subdirectory per recording holding signals.edf and reference.csv or truth.csv
    #[arg(long)]
    pub data: PathBuf,
    /// Pipeline config (TOML with [preprocess], [train] and optional channels)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the training seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output model file
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["model", "hypnodensity"]))]
pub struct StageArgs {
    /// EDF files or <label>.features.json files (channels of one recording)
    pub inputs: Vec<PathBuf>,
    /// Trained stager model
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// External hypnodensity CSVs to average instead of running a model (repeatable)
    #[arg(long)]
    pub hypnodensity: Vec<PathBuf>,
    /// Comma-separated channel labels to stage from EDF inputs (default: all)
    #[arg(long, value_delimiter = ',')]
    pub channels: Vec<String>,
    /// Pipeline config (TOML with [preprocess] and optional channels)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Recording id of the output (default: stem of the first input)
    #[arg(long)]
    pub recording_id: Option<String>,
    /// Output hypnodensity CSV
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct UncertaintyArgs {
    /// Hypnodensity CSV
    pub hypnodensity: PathBuf,
    /// Metric: ul, um, ur, uu or ue
    #[arg(long, value_parser = parse_metric)]
    pub metric: UncertaintyMetric,
    /// Output CSV
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    /// The given fraction of most uncertain epochs
    Rank,
    /// Epochs strictly more uncertain than the given value
    Threshold,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    /// Rank all inputs together
    Dataset,
    /// Rank each input on its own
    Recording,
}

#[derive(Debug, Args)]
pub struct GrayArgs {
    /// Hypnodensity CSVs
    #[arg(required = true)]
    pub hypnodensities: Vec<PathBuf>,
    /// Metric: ul, um, ur, uu or ue
    #[arg(long, value_parser = parse_metric, default_value = "uu")]
    pub metric: UncertaintyMetric,
    /// Selection mode
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Fraction in [0, 1] for rank mode, metric threshold for threshold mode
    #[arg(long)]
    pub value: f64,
    /// How rank mode pools several inputs
    #[arg(long, value_enum, default_value = "dataset")]
    pub pooling: PoolingArg,
    /// Output mask CSV for one input, or a directory for several
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write a stacked hypnodensity SVG with gray overlays (one input only)
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConsensusArgs {
    /// Panel manifest (TOML)
    #[arg(long)]
    pub panel: PathBuf,
    /// Write the majority hypnogram CSV here
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Write the tie statistics report here instead of stdout
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Reference hypnogram CSV
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Predicted hypnogram CSV or hypnodensity CSV (argmax is used)
    #[arg(long)]
    pub pred: PathBuf,
    /// Mask CSV of epochs to leave out
    #[arg(long)]
    pub exclude: Option<PathBuf>,
    /// Write the report here instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExcludeArg {
    /// Keep every scored epoch
    None,
    /// Drop epochs any scorer flagged uncertain
    AnyScorer,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Dataset directory: one subdirectory per recording with model.csv and reference.csv or truth.csv
    #[arg(long)]
    pub data: PathBuf,
    /// Metrics to evaluate (repeatable; default: all five)
    #[arg(long, value_parser = parse_metric)]
    pub metric: Vec<UncertaintyMetric>,
    /// Fraction grid as start:end:step
    #[arg(long, default_value = "0.01:0.95:0.01")]
    pub grid: String,
    /// Leave out epochs flagged by the panel in each recording's panel.toml
    #[arg(long, value_enum, default_value = "none")]
    pub exclude: ExcludeArg,
    /// Output directory for curves.json, exclusion.svg and capture.svg
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Panel manifest (TOML); use with --model
    #[arg(long, requires = "model", conflicts_with = "data")]
    pub panel: Option<PathBuf>,
    /// Model hypnodensity CSV
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Dataset directory with panel.toml and model.csv per recording, pooled into one report
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Unlikeability threshold separating gray from non-gray epochs
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    /// Write the report here instead of stdout
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator config (TOML); defaults apply to missing keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override the generator seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write signals.edf per recording
    #[arg(long)]
    pub signals: bool,
    /// Output directory
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Dataset directory: one subdirectory per recording with model.csv
    #[arg(long)]
    pub data: PathBuf,
    /// TCP port
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Address to bind
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: std::net::IpAddr,
}

impl From<ExcludeArg> for Option<ExclusionPolicy> {
    fn from(a: ExcludeArg) -> Self {
        match a {
            ExcludeArg::None => None,
            ExcludeArg::AnyScorer => Some(ExclusionPolicy::AnyScorer),
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("SOMNOGRAY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already configured");
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_env("SOMNOGRAY_LOG").try_init();
    configure_threads();
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
