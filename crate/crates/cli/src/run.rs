//! `train`, `predict` and `evaluate`: everything that lives in a run directory.
//!
//! ```text
//! RUN/manifest.json
//! RUN/training_log.jsonl
//! RUN/checkpoints/final.json
//! RUN/checkpoints/best.json      when a dev split exists
//! RUN/predictions.txt            + predictions.manifest.json
//! RUN/report.json                + report.manifest.json
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use tsd_core::corpus::{prepare_posts, Post, PreparedPost, Vocabulary};
use tsd_core::embeddings::{load_matrix, EmbeddingMatrix};
use tsd_core::evaluation::{evaluate, predict_spans, read_predictions, write_predictions, DecodeOptions};
use tsd_core::model::{build_model, save_checkpoint, train, Checkpoint, ModelConfig, Tagger};

use crate::data::{load_posts, load_split, load_vocab, require_labeled, split_path, vocab_path};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::settings::{ModelArgs, SettingsFile};

pub fn load_embeddings(path: &Path, vocab: &Vocabulary) -> Result<Arc<EmbeddingMatrix>> {
    Ok(Arc::new(
        load_matrix(path, Some(vocab)).with_context(|| format!("loading embeddings {}", path.display()))?,
    ))
}

/// Trains one model and writes its checkpoints and log into `run_dir`.
/// Returns the final model and the dev F1 of the last epoch.
pub fn train_into(
    run_dir: &Path,
    config: ModelConfig,
    embeddings: Arc<EmbeddingMatrix>,
    train_posts: &[PreparedPost],
    dev_posts: &[PreparedPost],
) -> Result<(Tagger, Option<f64>)> {
    let checkpoints = run_dir.join("checkpoints");
    std::fs::create_dir_all(&checkpoints).with_context(|| format!("creating {}", checkpoints.display()))?;
    let tagger = build_model(config, embeddings)?;
    log::info!("model has {} trainable parameters", tagger.num_parameters());
    let log_path = run_dir.join("training_log.jsonl");
    let mut log_file = std::io::BufWriter::new(
        std::fs::File::create(&log_path).with_context(|| format!("creating {}", log_path.display()))?,
    );
    let mut log_error = None;
    let outcome = train(tagger, train_posts, dev_posts, |record| {
        let line = serde_json::to_string(record).expect("records serialize");
        if let Err(e) = writeln!(log_file, "{line}").and_then(|_| log_file.flush()) {
            log_error.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_error {
        return Err(e).with_context(|| format!("writing {}", log_path.display()));
    }
    save_checkpoint(checkpoints.join("final.json"), &outcome.model)?;
    if let Some((epoch, best)) = &outcome.best {
        save_checkpoint(checkpoints.join("best.json"), best)?;
        log::info!("best dev F1 at epoch {epoch}");
    }
    let dev_f1 = outcome.history.last().and_then(|r| r.dev_f1);
    Ok((outcome.model, dev_f1))
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared-data directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Embedding matrix built by `embed` for this data directory.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Output run directory.
    #[arg(long)]
    pub run_dir: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
}

pub fn run_train(args: &TrainArgs, settings: &SettingsFile) -> Result<()> {
    let mut manifest = RunManifest::start("train");
    let config = args.model.apply(settings.model.clone());
    let vocab = load_vocab(&args.data)?;
    let embeddings = load_embeddings(&args.embeddings, &vocab)?;
    let Some(train_posts) = load_split(&args.data, "train")? else {
        bail!("{} has no training split", args.data.display());
    };
    require_labeled(&train_posts, "the training split")?;
    let dev_posts = load_split(&args.data, "dev")?.unwrap_or_default();
    require_labeled(&dev_posts, "the dev split")?;
    let train_prepared = prepare_posts(train_posts, &vocab, config.max_len);
    let dev_prepared = prepare_posts(dev_posts, &vocab, config.max_len);

    std::fs::create_dir_all(&args.run_dir).with_context(|| format!("creating {}", args.run_dir.display()))?;
    println!(
        "training {} on {} embeddings: {} train / {} dev posts, {} epochs",
        config.variant(),
        embeddings.config,
        train_prepared.len(),
        dev_prepared.len(),
        config.epochs
    );
    let (_, dev_f1) = train_into(
        &args.run_dir,
        config.clone(),
        embeddings.clone(),
        &train_prepared,
        &dev_prepared,
    )?;
    if let Some(f) = dev_f1 {
        println!("final dev span F1: {f:.4}");
    }

    manifest.seed = Some(config.seed);
    manifest.model = Some(config);
    manifest
        .input("data", &args.data)
        .input("embeddings", &args.embeddings)
        .output("final", args.run_dir.join("checkpoints").join("final.json"))
        .output("training_log", args.run_dir.join("training_log.jsonl"))
        .result("embedding_config", embeddings.config)
        .result("dev_f1", dev_f1);
    if !dev_prepared.is_empty() {
        manifest.output("best", args.run_dir.join("checkpoints").join("best.json"));
    }
    manifest.finish(&args.run_dir.join("manifest.json"))
}

/// Data and embedding paths recorded by the `train` manifest of a run.
fn run_inputs(run_dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let m = RunManifest::read(&run_dir.join("manifest.json"))?;
    let get = |k: &str| {
        m.inputs
            .get(k)
            .cloned()
            .with_context(|| format!("run manifest lacks the `{k}` input"))
    };
    Ok((get("data")?, get("embeddings")?))
}

fn checkpoint_path(run_dir: &Path, which: &str) -> PathBuf {
    match which {
        "final" | "best" => run_dir.join("checkpoints").join(format!("{which}.json")),
        path => PathBuf::from(path),
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Run directory written by `train`.
    #[arg(long)]
    pub run_dir: PathBuf,
    /// `final`, `best`, or a checkpoint path.
    #[arg(long, default_value = "final")]
    pub checkpoint: String,
    /// Posts to tag: a dataset CSV or prepared .jsonl [default: the run's dev split].
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Split of the run's data directory to tag when --input is absent.
    #[arg(long, default_value = "dev")]
    pub split: String,
    /// Mark characters between consecutive toxic tokens too.
    #[arg(long)]
    pub bridge_gaps: bool,
    /// Output file [default: RUN/predictions.txt].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_predict(args: &PredictArgs) -> Result<()> {
    let mut manifest = RunManifest::start("predict");
    let (data, emb_path) = run_inputs(&args.run_dir)?;
    let vocab = load_vocab(&data)?;
    let ck_path = checkpoint_path(&args.run_dir, &args.checkpoint);
    let ck = Checkpoint::read(&ck_path).with_context(|| format!("reading checkpoint {}", ck_path.display()))?;
    let tagger = ck.into_tagger(load_embeddings(&emb_path, &vocab)?)?;
    let input = args.input.clone().unwrap_or_else(|| split_path(&data, &args.split));
    let posts = load_posts(&input)?;
    let prepared = prepare_posts(posts, &vocab, tagger.config().max_len);
    let spans = predict_spans(
        &tagger,
        &prepared,
        DecodeOptions {
            bridge_gaps: args.bridge_gaps,
        },
    )?;
    let out = args.out.clone().unwrap_or_else(|| args.run_dir.join("predictions.txt"));
    write_predictions(&out, &spans)?;
    let toxic_posts = spans.iter().filter(|s| !s.offsets.is_empty()).count();
    println!(
        "{} posts tagged ({toxic_posts} with toxic spans), written to {}",
        spans.len(),
        out.display()
    );

    manifest.seed = Some(tagger.config().seed);
    manifest.model = Some(tagger.config().clone());
    manifest
        .input("checkpoint", &ck_path)
        .input("posts", &input)
        .input("embeddings", &emb_path)
        .input("vocab", vocab_path(&data))
        .output("predictions", &out)
        .result("posts", spans.len())
        .result("bridge_gaps", args.bridge_gaps);
    manifest.finish(&manifest_path_for(&out))
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold posts: a dataset CSV with spans or a prepared .jsonl.
    #[arg(long)]
    pub gold: PathBuf,
    /// Prediction file, one offset list per gold post in the same order.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Report file [default: report.json beside the predictions].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let mut manifest = RunManifest::start("evaluate");
    let gold: Vec<Post> = load_posts(&args.gold)?;
    require_labeled(&gold, "gold posts")?;
    let ids: Vec<String> = gold.iter().map(|p| p.id.clone()).collect();
    let preds = read_predictions(&args.predictions, &ids)?;
    let report = evaluate(&preds, &gold)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.predictions.with_file_name("report.json"));
    std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("writing {}", out.display()))?;
    println!(
        "mean span F1: {:.3} over {} posts ({} with empty gold)",
        report.mean_f1, report.num_posts, report.num_empty_gold
    );
    manifest
        .input("gold", &args.gold)
        .input("predictions", &args.predictions)
        .output("report", &out)
        .result("mean_f1", report.mean_f1)
        .result("posts", report.num_posts);
    manifest.finish(&manifest_path_for(&out))
}
