//! `chansynth`: reproducible pipelines over multiplexed image stacks.
//!
//! Every command prints one JSON summary line on standard output, writes
//! data files plus a manifest into the output directory, and exits 0 on
//! success, 1 on I/O failure, 2 on invalid input.

mod cmds;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use chansynth_core::Error;
use cmds::experiment::ExperimentFlags;
use cmds::synth::SynthOverrides;
use cmds::train::{ModelKind, TrainFlags};
use config::{parse_fractions, parse_indices, parse_seeds, RunConfig};

#[derive(Parser)]
#[command(
    name = "chansynth",
    version,
    about = "Channel similarity analysis and conditional synthesis for multiplexed image stacks"
)]
struct Cli {
    /// Flat key = value config file (# comments allowed)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Seed for commands that generate or train (default 0)
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Worker threads; 1 keeps every stage serial (default 1)
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Output directory (default "out")
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Convert a multi-page TIFF into an .mcs1 stack
    Import(ImportArgs),
    /// Generate a labeled synthetic stack
    Synth(SynthArgs),
    /// SSIM/Pearson matrices, clustering, and channel selection
    Analyze(AnalyzeArgs),
    /// Paired cluster-vs-random conditioning experiment
    Experiment(ExperimentArgs),
    /// Train a conditional model on selected channels
    Train(TrainArgs),
    /// Synthesize target channels with a trained model
    Predict(PredictArgs),
    /// Score a trained model against ground-truth channels
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct ImportArgs {
    /// Multi-page grayscale TIFF
    input: PathBuf,
    /// Area-average to HEIGHT WIDTH after loading
    #[arg(long, num_args = 2, value_names = ["HEIGHT", "WIDTH"])]
    downsample: Option<Vec<usize>>,
    /// Min-max scale each channel to [0, 1]
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    channels: Option<usize>,
    #[arg(long)]
    templates: Option<usize>,
    /// Pixel noise standard deviation
    #[arg(long)]
    noise: Option<f64>,
    /// Gaussian blobs per template
    #[arg(long)]
    blobs: Option<usize>,
    /// Per-channel gain range
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    gain: Option<Vec<f64>>,
    /// Per-channel offset range
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    offset: Option<Vec<f64>>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input .mcs1 stack
    input: PathBuf,
    /// Fixed cluster count (default: silhouette scan)
    #[arg(long)]
    k: Option<usize>,
    /// Channels to select (default: one per cluster)
    #[arg(long)]
    select: Option<usize>,
    /// Min-max scale each channel to [0, 1] before analysis
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Input .mcs1 stack
    input: PathBuf,
    /// Comma-separated selection fractions, e.g. 0.25,0.5
    #[arg(long)]
    fractions: Option<String>,
    /// Seeds: a comma list "0,3,7" or an exclusive range "0..20"
    #[arg(long)]
    seeds: Option<String>,
    /// Share of patch rows held out for the test loss
    #[arg(long)]
    holdout: Option<f64>,
    /// Normalized-loss quality bound for the extrapolation output
    #[arg(long, default_value_t = 65.0)]
    threshold: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Linear,
    Adversarial,
}

#[derive(Args)]
struct TrainArgs {
    /// Input .mcs1 stack
    input: PathBuf,
    /// Model family
    #[arg(long, value_enum, default_value = "linear")]
    kind: KindArg,
    /// Conditioning channel indices, e.g. 0,3,7
    #[arg(long, value_name = "LIST")]
    sources: Option<String>,
    /// selection.json written by analyze
    #[arg(long, value_name = "PATH")]
    selection: Option<PathBuf>,
    /// Patch radius
    #[arg(long)]
    radius: Option<usize>,
    /// Patch center stride
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate
    #[arg(long)]
    lr: Option<f64>,
    /// Minibatch size
    #[arg(long)]
    batch: Option<usize>,
    /// L1 weight in the combined objective
    #[arg(long)]
    lambda: Option<f64>,
    /// Discriminator steps per generator step
    #[arg(long)]
    d_steps: Option<usize>,
    /// Generator hidden layer sizes (adversarial only)
    #[arg(long, value_name = "LIST", default_value = "8")]
    g_hidden: String,
    /// Discriminator hidden layer sizes (adversarial only)
    #[arg(long, value_name = "LIST", default_value = "8")]
    d_hidden: String,
}

#[derive(Args)]
struct PredictArgs {
    /// Input .mcs1 stack
    input: PathBuf,
    /// model.json written by train
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Input .mcs1 stack holding the ground-truth channels
    input: PathBuf,
    /// model.json written by train
    #[arg(long)]
    model: PathBuf,
    /// Extra pixels to trim from every edge before scoring
    #[arg(long, default_value_t = 0)]
    crop_border: usize,
}

fn pair<T: Copy>(v: &[T]) -> (T, T) {
    (v[0], v[1])
}

fn run(cli: &Cli) -> chansynth_core::Result<serde_json::Value> {
    let threads = cli.threads.unwrap_or(1);
    if threads == 0 {
        return Err(Error::validation("--threads must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::validation(format!("thread pool setup failed: {e}")))?;

    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_file(&text)?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = cmds::Ctx { cfg, seed: cli.seed.unwrap_or(0), threads, out };

    match &cli.cmd {
        Cmd::Import(a) => {
            let ds = a.downsample.as_deref().map(pair);
            cmds::import::run(&ctx, &a.input, ds, a.normalize)
        }
        Cmd::Synth(a) => {
            let ov = SynthOverrides {
                height: a.height,
                width: a.width,
                channels: a.channels,
                templates: a.templates,
                noise: a.noise,
                blobs: a.blobs,
                gain: a.gain.as_deref().map(pair),
                offset: a.offset.as_deref().map(pair),
            };
            cmds::synth::run(&ctx, &ov)
        }
        Cmd::Analyze(a) => cmds::analyze::run(&ctx, &a.input, a.k, a.select, a.normalize),
        Cmd::Experiment(a) => {
            let flags = ExperimentFlags {
                fractions: a.fractions.as_deref().map(parse_fractions).transpose()?,
                seeds: a.seeds.as_deref().map(parse_seeds).transpose()?,
                holdout: a.holdout,
                threshold: a.threshold,
            };
            cmds::experiment::run(&ctx, &a.input, &flags)
        }
        Cmd::Train(a) => {
            let flags = TrainFlags {
                kind: match a.kind {
                    KindArg::Linear => ModelKind::Linear,
                    KindArg::Adversarial => ModelKind::Adversarial,
                },
                sources: a.sources.as_deref().map(parse_indices).transpose()?,
                selection: a.selection.clone(),
                radius: a.radius,
                stride: a.stride,
                epochs: a.epochs,
                learning_rate: a.lr,
                batch_size: a.batch,
                lambda_l1: a.lambda,
                d_steps: a.d_steps,
                g_hidden: parse_indices(&a.g_hidden)?,
                d_hidden: parse_indices(&a.d_hidden)?,
            };
            cmds::train::run(&ctx, &a.input, &flags)
        }
        Cmd::Predict(a) => cmds::predict::run(&ctx, &a.input, &a.model),
        Cmd::Evaluate(a) => cmds::evaluate::run(&ctx, &a.input, &a.model, a.crop_border),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}
