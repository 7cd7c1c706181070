//! Command-line surface: dataset generation, training, evaluation, and
//! embedding export.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use sgcnn::data::{split, Dataset};
use sgcnn::error::Error;
use sgcnn::layer::PoolingStrategy;
use sgcnn::model::{
    embed, evaluate, metrics_to_csv, prepare_dataset, train, Checkpoint, Model, ModelConfig,
};
use sgcnn::nn::{ActivationKind, Optimizer, TrainConfig};
use sgcnn::synth::{generate, Manifest, SynthConfig};

const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_DATA: u8 = 5;
const EXIT_NUMERIC: u8 = 6;

#[derive(Parser)]
#[command(
    name = "sgcnn",
    about = "Structural graph convolutional networks for subgraph classification",
    after_help = "Exit codes:\n  0  success\n  2  usage error (unknown flag or bad argument)\n  3  configuration validation failure\n  4  missing file or i/o failure\n  5  data or checkpoint mismatch\n  6  numeric failure (non-finite values)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset plus its manifest.
    GenData(GenDataArgs),
    /// Train a model; writes checkpoint, metrics CSV, and the effective run config.
    Train(TrainArgs),
    /// Evaluate a checkpoint; prints accuracy and writes the confusion matrix
    /// and per-sample prediction dump.
    Eval(EvalArgs),
    /// Export per-sample embeddings and a nearest-neighbor report.
    Embed(EmbedArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// TOML config file with a [synth] section.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset JSONL file.
    #[arg(long)]
    dataset: PathBuf,
    /// TOML config file with [model] and/or [train] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Root seed (drives init, sampling, pooling, shuffling).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Batch size.
    #[arg(long)]
    batch: Option<usize>,
    /// First-layer kernel size.
    #[arg(long)]
    k: Option<usize>,
    /// First-layer output sample size.
    #[arg(long)]
    s: Option<usize>,
    /// Pre-dropout cap applied to every layer.
    #[arg(long = "pre-dropout")]
    pre_dropout: Option<usize>,
    /// Hidden-layer activation (sigmoid|softplus|tanh|relu|leaky-relu(a)).
    #[arg(long)]
    activation: Option<String>,
    /// Total layer count including the aggregation layer (3 or 4); selects
    /// the default architecture when no config file is given.
    #[arg(long)]
    layers: Option<usize>,
    /// Candidate pooling: degree-ranked or random.
    #[arg(long)]
    pooling: Option<String>,
    /// Record wall-clock time per epoch in the metrics CSV. Off by default
    /// so identical runs produce byte-identical metrics files.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Nearest neighbors to report per sample (0 = embeddings only).
    #[arg(long, default_value_t = 5)]
    k: usize,
}

/// The human-readable run config file: any section may be omitted.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    synth: Option<SynthConfig>,
    model: Option<ModelConfig>,
    train: Option<TrainConfig>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig, Error> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
    }
}

fn ensure_out_dir(out: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(out)?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Error> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

fn run_gen_data(args: &GenDataArgs) -> Result<(), Error> {
    let file_cfg = load_file_config(args.config.as_deref())?;
    let mut cfg = file_cfg.synth.unwrap_or_default();
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    ensure_out_dir(&args.out)?;
    let dataset = generate(&cfg)?;
    dataset.save_jsonl(&args.out.join("dataset.jsonl"))?;
    write_json(
        &args.out.join("manifest.json"),
        &Manifest {
            version: 1,
            config: cfg,
            num_samples: dataset.len(),
        },
    )?;
    println!("wrote {} samples to {}", dataset.len(), args.out.display());
    Ok(())
}

/// Everything needed to reproduce a run byte-identically.
#[derive(Serialize)]
struct EffectiveRunConfig<'a> {
    command: &'a str,
    dataset: String,
    model: &'a ModelConfig,
    train: &'a TrainConfig,
    timing: bool,
}

fn run_train(args: &TrainArgs) -> Result<(), Error> {
    let file_cfg = load_file_config(args.config.as_deref())?;
    let mut dataset = Dataset::load_jsonl(&args.dataset)?;
    if dataset.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let num_classes = dataset.num_classes().max(2);
    let seed = args.seed.unwrap_or(0);
    let mut model_cfg = match file_cfg.model {
        Some(cfg) => cfg,
        None => ModelConfig::standard(num_classes, args.layers.unwrap_or(3), seed)?,
    };
    if let Some(seed) = args.seed {
        model_cfg.seed = seed;
    }
    if let Some(k) = args.k {
        model_cfg.layers[0].k = k;
    }
    if let Some(s) = args.s {
        model_cfg.layers[0].s = s;
    }
    if let Some(pd) = args.pre_dropout {
        for layer in &mut model_cfg.layers {
            layer.pre_dropout = pd;
        }
    }
    if let Some(act) = &args.activation {
        let parsed: ActivationKind = act.parse()?;
        let last = model_cfg.layers.len() - 1;
        for layer in &mut model_cfg.layers[..last] {
            layer.activation = parsed;
        }
    }
    if let Some(pooling) = &args.pooling {
        let strategy = match pooling.as_str() {
            "degree-ranked" => PoolingStrategy::DegreeRanked,
            "random" => PoolingStrategy::Random,
            other => return Err(Error::Config(format!("unknown pooling '{other}'"))),
        };
        for layer in &mut model_cfg.layers {
            layer.pooling = strategy;
        }
    }
    let mut train_cfg = file_cfg.train.unwrap_or_default();
    if let Some(seed) = args.seed {
        train_cfg.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        train_cfg.epochs = epochs;
    }
    if let Some(lr) = args.lr {
        train_cfg.learning_rate = lr;
    }
    if let Some(batch) = args.batch {
        train_cfg.batch_size = batch;
    }
    model_cfg.validate()?;
    train_cfg.validate()?;
    ensure_out_dir(&args.out)?;
    write_json(
        &args.out.join("run-config.json"),
        &EffectiveRunConfig {
            command: "train",
            dataset: args.dataset.display().to_string(),
            model: &model_cfg,
            train: &train_cfg,
            timing: args.timing,
        },
    )?;
    prepare_dataset(&mut dataset, &model_cfg.embedder)?;
    let (train_idx, test_idx) = split(&dataset, 0.8, train_cfg.seed)?;
    let mut model = Model::init(model_cfg)?;
    let mut optimizer = Optimizer::new(train_cfg.optimizer, train_cfg.learning_rate);
    let metrics = train(
        &mut model,
        &mut optimizer,
        &dataset,
        &train_idx,
        &test_idx,
        &train_cfg,
        args.timing,
    )?;
    std::fs::write(args.out.join("metrics.csv"), metrics_to_csv(&metrics))?;
    Checkpoint {
        version: 1,
        model: model.config.clone(),
        params: model.store.clone(),
        optimizer: optimizer.state().clone(),
        train: Some(train_cfg),
    }
    .save(&args.out.join("checkpoint.json"))?;
    if let Some(last) = metrics.last() {
        println!(
            "trained {} epochs; final train loss {:.4}, test accuracy {:.4}",
            metrics.len(),
            last.train_loss,
            last.test_accuracy
        );
    }
    Ok(())
}

fn load_model_for(dataset: &Dataset, path: &Path) -> Result<Model, Error> {
    let ckpt = Checkpoint::load(path)?;
    let classes = dataset.num_classes();
    if classes > ckpt.model.classifier.num_classes {
        return Err(Error::Contract(format!(
            "dataset has {classes} classes but the checkpoint was trained with {}",
            ckpt.model.classifier.num_classes
        )));
    }
    Model::from_parts(ckpt.model, ckpt.params)
}

fn run_eval(args: &EvalArgs) -> Result<(), Error> {
    let mut dataset = Dataset::load_jsonl(&args.dataset)?;
    let model = load_model_for(&dataset, &args.checkpoint)?;
    prepare_dataset(&mut dataset, &model.config.embedder)?;
    ensure_out_dir(&args.out)?;
    let indices: Vec<usize> = (0..dataset.len()).collect();
    let report = evaluate(&model, &dataset, &indices)?;
    let mut confusion = String::new();
    for row in &report.confusion {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        confusion.push_str(&cells.join(","));
        confusion.push('\n');
    }
    std::fs::write(args.out.join("confusion.csv"), confusion)?;
    let mut dump = std::io::BufWriter::new(std::fs::File::create(
        args.out.join("predictions.jsonl"),
    )?);
    for prediction in &report.predictions {
        serde_json::to_writer(&mut dump, prediction)?;
        dump.write_all(b"\n")?;
    }
    println!("accuracy {:.4} over {} samples", report.accuracy, indices.len());
    Ok(())
}

fn run_embed(args: &EmbedArgs) -> Result<(), Error> {
    let mut dataset = Dataset::load_jsonl(&args.dataset)?;
    let model = load_model_for(&dataset, &args.checkpoint)?;
    prepare_dataset(&mut dataset, &model.config.embedder)?;
    ensure_out_dir(&args.out)?;
    let indices: Vec<usize> = (0..dataset.len()).collect();
    let records = embed(&model, &dataset, &indices, args.k)?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(
        args.out.join("embeddings.jsonl"),
    )?);
    for record in &records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    println!("wrote {} embeddings to {}", records.len(), args.out.display());
    Ok(())
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::Io(_) | Error::Serde(_) => EXIT_IO,
        Error::Contract(_) | Error::Usage(_) => EXIT_DATA,
        Error::Numeric(_) => EXIT_NUMERIC,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(args) => run_gen_data(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Embed(args) => run_embed(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = exit_code_for(&err);
            eprintln!("error: code={code} msg={}", err.to_string().replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
