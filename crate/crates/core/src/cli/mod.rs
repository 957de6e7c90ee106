//! Experiment driver behind the `lpqc` binary.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 data error.

mod commands;
mod config;
mod train;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    cmd_decode, cmd_encode, cmd_eval, cmd_gen_dataset, cmd_gradnorm, read_context, BatchReport, DatasetSource,
    DecodeRequest, EncodeRequest, EvalMetrics, GradnormRequest,
};
pub use config::{
    ExperimentConfig, GeneratorConfig, GeneratorFamily, LayoutConfig, OptimizerConfig, OutputConfig, PriorConfig,
    RunScale, SeedConfig, SolverKind, TaskConfig, TaskKind, DESK_EPOCHS, PAPER_EPOCHS,
};
pub use train::{build_model, cmd_train, load_task, EpochLog, FinalMetrics, RunManifest, SOFTWARE};

use crate::data::{EncodeOptions, Ensemble, ScaleMode};
use crate::grad::bench::BenchFamily;
use crate::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lpqc", version, about = "Latent-conditioned quantum circuit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a generator from a TOML config (or replay a manifest).
    Train(TrainArgs),
    /// Normalized squared gradient norms at random initializations.
    Gradnorm(GradnormArgs),
    /// Molecule text file to a pure-state ensemble file.
    Encode(EncodeArgs),
    /// Ensemble file back to molecules, optionally with bond graphs.
    Decode(DecodeArgs),
    /// Compare a generated ensemble against a target ensemble.
    Eval(EvalArgs),
    /// Write a synthetic or model-sampled ensemble file.
    GenDataset(GenDatasetArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Experiment config (TOML).
    #[arg(long, required_unless_present = "replay")]
    pub config: Option<PathBuf>,
    /// Rerun the resolved config stored in a previous manifest.
    #[arg(long, conflicts_with = "config")]
    pub replay: Option<PathBuf>,
    /// Override the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Override the epoch budget.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Use paper-scale defaults where the config leaves them unset.
    #[arg(long)]
    pub paper_scale: bool,
}

#[derive(Debug, Args)]
pub struct GradnormArgs {
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "no-latent-uniform,rd,lpqc-gauss-linear,lpqc-gauss-tanh"
    )]
    pub families: Vec<String>,
    #[arg(long = "n", value_delimiter = ',', required = true)]
    pub n_list: Vec<usize>,
    #[arg(long = "layers", value_delimiter = ',', default_value = "10")]
    pub l_list: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub m: usize,
    /// Trials per point (128 at desk scale; 1024 for full-scale runs).
    #[arg(long, default_value_t = 128)]
    pub trials: usize,
    #[arg(long, default_value_t = 128)]
    pub batch: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// Normalization context (JSON). Read, or written with `--fit-context`.
    #[arg(long)]
    pub context: PathBuf,
    #[arg(long)]
    pub fit_context: bool,
    /// Store the atom count in the last amplitude.
    #[arg(long)]
    pub store_count: bool,
    /// Skip centroid centering and rotation.
    #[arg(long)]
    pub no_align: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScaleArg {
    Paper2x,
    Strict1x,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub context: PathBuf,
    #[arg(long, value_enum, default_value = "paper2x")]
    pub scale: ScaleArg,
    /// Fixed atom count instead of occupancy detection.
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub graphs: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Metrics JSON destination.
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for PCA point files.
    #[arg(long)]
    pub pca_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Sample from a trained checkpoint instead of the synthetic task.
    #[arg(long, conflicts_with_all = ["n", "m"])]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, required_unless_present = "checkpoint")]
    pub n: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = crate::data::DEFAULT_SCALE)]
    pub noise: f64,
    #[arg(long, default_value_t = 256)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

/// Parses `args` (including the program name) and runs the command,
/// printing diagnostics to stderr. Returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn report_failures(report: &BatchReport, what: &str) {
    for (_, msg) in &report.failures {
        eprintln!("warning: {msg}");
    }
    eprintln!("{what} {} records, {} failed", report.ok, report.failures.len());
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Train(a) => {
            let mut cfg = match (&a.config, &a.replay) {
                (_, Some(m)) => RunManifest::load(m)?.config,
                (Some(c), None) => {
                    let mut cfg = ExperimentConfig::load(c)?;
                    if a.paper_scale && a.epochs.is_none() {
                        cfg.scale = RunScale::Paper;
                        cfg.optimizer.epochs = Some(PAPER_EPOCHS);
                    }
                    cfg
                }
                (None, None) => return Err(Error::Config("either --config or --replay is required".into())),
            };
            if let Some(e) = a.epochs {
                cfg.optimizer.epochs = Some(e);
            }
            if let Some(o) = a.out {
                cfg.output.dir = o;
            }
            let cfg = cfg.resolve()?;
            let m = cmd_train(&cfg)?;
            println!(
                "trained {} epochs; final test D_Wass {}; outputs in {}",
                m.epochs.len(),
                m.final_metrics.test_wasserstein,
                cfg.output.dir.display()
            );
        }
        Command::Gradnorm(a) => {
            let families = a
                .families
                .iter()
                .map(|f| f.parse::<BenchFamily>())
                .collect::<Result<Vec<_>>>()?;
            let req = GradnormRequest {
                families,
                n_list: a.n_list,
                l_list: a.l_list,
                m: a.m,
                trials: a.trials,
                batch: a.batch,
                seed: a.seed,
            };
            let rows = cmd_gradnorm(&req, &a.out)?;
            for r in &rows {
                println!("{}", r.csv_row());
            }
        }
        Command::Encode(a) => {
            let report = cmd_encode(&EncodeRequest {
                input: &a.input,
                output: &a.output,
                context: &a.context,
                fit_context: a.fit_context,
                options: EncodeOptions {
                    store_count: a.store_count,
                    align: !a.no_align,
                },
            })?;
            report_failures(&report, "encoded");
        }
        Command::Decode(a) => {
            let report = cmd_decode(&DecodeRequest {
                input: &a.input,
                output: &a.output,
                context: &a.context,
                scale: match a.scale {
                    ScaleArg::Paper2x => ScaleMode::Paper2x,
                    ScaleArg::Strict1x => ScaleMode::Strict1x,
                },
                atoms: a.atoms,
                graphs: a.graphs.as_deref(),
            })?;
            report_failures(&report, "decoded");
        }
        Command::Eval(a) => {
            let g = Ensemble::read(&a.generated)?.to_density();
            let t = Ensemble::read(&a.target)?.to_density();
            let metrics = cmd_eval(&g, &t, a.pca_dir.as_deref())?;
            let json = serde_json::to_string_pretty(&metrics).expect("serializes");
            write_file(&a.out, &json)?;
            println!("{json}");
        }
        Command::GenDataset(a) => {
            let source = match a.checkpoint {
                Some(p) => DatasetSource::Checkpoint(p),
                None => DatasetSource::Multicluster {
                    n: a.n.ok_or_else(|| Error::Config("--n is required".into()))?,
                    m: a.m.unwrap_or(0),
                    noise: a.noise,
                },
            };
            let n = cmd_gen_dataset(&source, a.count, a.seed, &a.out)?;
            println!("wrote {n} states to {}", a.out.display());
        }
    }
    Ok(EXIT_OK)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
