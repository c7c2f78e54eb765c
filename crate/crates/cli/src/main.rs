use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eauc::corrections::CorrectionKind;
use eauc::synthetic::EntityDist;
use eauc::ValueBounds;

mod commands;
mod pipeline;

#[derive(Parser, Debug)]
#[command(
    name = "eauc",
    version,
    about = "Bias-aware evaluation of dyadic regression models"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for splits, training and sampling [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Value bounds as `min,max`; otherwise declared or inferred from data
    #[arg(long, global = true, value_parser = parse_bounds)]
    pub bounds: Option<ValueBounds>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Format of reports printed to stdout
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

impl Global {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Md,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum FileFormat {
    Csv,
    Movielens,
}

impl From<FileFormat> for eauc::data::InputFormat {
    fn from(f: FileFormat) -> Self {
        match f {
            FileFormat::Csv => eauc::data::InputFormat::Csv,
            FileFormat::Movielens => eauc::data::InputFormat::MovielensDat,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
pub enum Baseline {
    Random,
    DyadAverage,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Random train/test split, written as `<name>.train.csv` and `<name>.test.csv`
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = FileFormat::Csv)]
        input_format: FileFormat,
        #[arg(long, default_value_t = 0.1)]
        test_fraction: f64,
        /// Defaults to the input file stem
        #[arg(long)]
        name: Option<String>,
    },
    /// Generate a synthetic dataset with a `.synth.cfg` sidecar
    Synth(SynthArgs),
    /// Train biased matrix factorization; writes `mf.model` and `mf.history.json`
    TrainMf {
        #[arg(long)]
        train: PathBuf,
        /// Key-value file of hyperparameters; flags below override it
        #[arg(long, visible_alias = "hp")]
        config: Option<PathBuf>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        l2: Option<f64>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Predict test dyads with a trained model or a baseline
    Predict {
        #[arg(long)]
        test: PathBuf,
        #[arg(
            long,
            conflicts_with = "baseline",
            required_unless_present = "baseline"
        )]
        model: Option<PathBuf>,
        #[arg(long, value_enum)]
        baseline: Option<Baseline>,
        /// Needed by the dyad-average baseline
        #[arg(long)]
        train: Option<PathBuf>,
    },
    /// Entity-wise KS difficulty of a train split
    Difficulty {
        #[arg(long)]
        train: PathBuf,
    },
    /// Every metric of one prediction file, with JSON, Markdown, CSV and SVG artifacts
    Evaluate {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Defaults to the prediction file stem
        #[arg(long)]
        model_name: Option<String>,
        #[arg(long, default_value_t = eauc::metrics::DEFAULT_BINS)]
        bins: usize,
    },
    /// Fit a post-hoc correction on held-out dyads and apply it to the test set
    Correct {
        #[arg(long, value_parser = parse_kind)]
        kind: CorrectionKind,
        #[arg(long)]
        model: PathBuf,
        /// Data the model was trained on (source of entity means)
        #[arg(long)]
        train: PathBuf,
        /// Dyads not seen in training, used to fit the correction
        #[arg(long)]
        held_out: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Run split, training, prediction, correction and evaluation from a config file
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
    /// Overlay eccentricity-error curves of several prediction files
    Curve {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// `name=path`, repeatable
        #[arg(long = "predictions", required = true, value_parser = parse_named)]
        predictions: Vec<(String, PathBuf)>,
        #[arg(long, default_value_t = eauc::metrics::DEFAULT_BINS)]
        bins: usize,
        #[arg(long, default_value = "curves.svg")]
        file: String,
    },
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Key-value file with every synthetic key; flags below override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub items: Option<usize>,
    #[arg(long)]
    pub density: Option<f64>,
    /// `uniform` or `normal:<sigma>`
    #[arg(long, value_parser = parse_dist)]
    pub dist: Option<EntityDist>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub name: Option<String>,
}

fn parse_bounds(s: &str) -> Result<ValueBounds, String> {
    ValueBounds::parse_declared(s).map_err(|e| e.to_string())
}

fn parse_kind(s: &str) -> Result<CorrectionKind, String> {
    s.parse().map_err(|e: eauc::Error| e.to_string())
}

fn parse_dist(s: &str) -> Result<EntityDist, String> {
    s.parse().map_err(|e: eauc::Error| e.to_string())
}

fn parse_named(s: &str) -> Result<(String, PathBuf), String> {
    let (name, path) = s.split_once('=').ok_or("expected `name=path`")?;
    if name.is_empty() {
        return Err("empty curve name".into());
    }
    Ok((name.to_string(), PathBuf::from(path)))
}

/// 2 for bad arguments, 3 for bad data, 4 when training or fitting fails.
fn exit_code(err: &anyhow::Error) -> u8 {
    let kind = err
        .chain()
        .find_map(|e| e.downcast_ref::<eauc::Error>())
        .map(eauc::Error::kind);
    match kind {
        Some(eauc::ErrorKind::Argument) => 2,
        Some(eauc::ErrorKind::Training) => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match cli.command {
        Command::Split {
            input,
            input_format,
            test_fraction,
            name,
        } => commands::split(g, &input, input_format.into(), test_fraction, name),
        Command::Synth(args) => commands::synth(g, &args),
        Command::TrainMf {
            train,
            config,
            dim,
            lr,
            l2,
            epochs,
        } => commands::train_mf(g, &train, config.as_deref(), dim, lr, l2, epochs),
        Command::Predict {
            test,
            model,
            baseline,
            train,
        } => commands::predict(g, &test, model.as_deref(), baseline, train.as_deref()),
        Command::Difficulty { train } => commands::difficulty(g, &train),
        Command::Evaluate {
            train,
            test,
            predictions,
            model_name,
            bins,
        } => commands::evaluate(g, &train, &test, &predictions, model_name, bins),
        Command::Correct {
            kind,
            model,
            train,
            held_out,
            test,
        } => commands::correct(g, kind, &model, &train, &held_out, &test),
        Command::Pipeline { config } => pipeline::run(g, &config),
        Command::Curve {
            train,
            test,
            predictions,
            bins,
            file,
        } => commands::curve(g, &train, &test, &predictions, bins, &file),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // core errors already print their source; skip repeats
            let mut parts: Vec<String> = Vec::new();
            for cause in e.chain().map(|c| c.to_string()) {
                if !parts.last().is_some_and(|p| p.ends_with(&cause)) {
                    parts.push(cause);
                }
            }
            eprintln!("error: {}", parts.join(": "));
            ExitCode::from(exit_code(&e))
        }
    }
}
