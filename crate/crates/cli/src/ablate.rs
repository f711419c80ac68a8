//! The model-variant × embedding-configuration grid.
//!
//! ```text
//! OUT/embeddings/CONFIG.emb
//! OUT/lm-cache/
//! OUT/cells/VARIANT__CONFIG/{manifest.json, training_log.jsonl, checkpoints/}
//! OUT/ablation.json
//! OUT/report.md
//! OUT/manifest.json
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::Args;
use tsd_core::corpus::prepare_posts;
use tsd_core::embeddings::{save_matrix, EmbeddingConfig, EmbeddingMatrix};
use tsd_core::evaluation::{ablation_table, mean_span_f1, AblationCell, DecodeOptions, Split};
use tsd_core::model::{ModelConfig, ModelVariant};

use crate::data::{load_split, load_vocab, require_labeled};
use crate::embed::Sources;
use crate::manifest::RunManifest;
use crate::run::train_into;
use crate::settings::{parse_cell, ModelArgs, SettingsFile, SourceArgs};

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Prepared-data directory with train and dev splits.
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub sources: SourceArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Run only these cells, given as MODEL:EMBEDDING (repeatable).
    #[arg(long, value_name = "MODEL:EMBEDDING")]
    pub only: Vec<String>,
    /// Cell i of the full grid trains with seed base_seed + i [default: the model seed].
    #[arg(long)]
    pub base_seed: Option<u64>,
    #[command(flatten)]
    pub model: ModelArgs,
}

/// Row-major position in the full 4 × 7 grid.
pub fn cell_index(variant: ModelVariant, embedding: EmbeddingConfig) -> usize {
    let row = ModelVariant::ALL.iter().position(|&v| v == variant).expect("listed");
    let col = EmbeddingConfig::ALL
        .iter()
        .position(|&e| e == embedding)
        .expect("listed");
    row * EmbeddingConfig::ALL.len() + col
}

fn cell_dir(out: &Path, variant: ModelVariant, embedding: EmbeddingConfig) -> PathBuf {
    out.join("cells").join(format!("{variant}__{embedding}"))
}

/// Returns true when every requested cell completed.
pub fn run(args: &AblateArgs, settings: &SettingsFile) -> Result<bool> {
    if args.model.variant.is_some() {
        bail!("--variant does not apply to the grid; use --only MODEL:EMBEDDING");
    }
    let mut manifest = RunManifest::start("ablate");
    let base = args.model.apply(settings.model.clone());
    let base_seed = args.base_seed.unwrap_or(base.seed);
    let embedding_settings = args.sources.apply(settings.embedding.clone());

    let selected: Vec<(ModelVariant, EmbeddingConfig)> = if args.only.is_empty() {
        ModelVariant::ALL
            .into_iter()
            .flat_map(|v| EmbeddingConfig::ALL.into_iter().map(move |e| (v, e)))
            .collect()
    } else {
        args.only.iter().map(|s| parse_cell(s)).collect::<Result<_>>()?
    };

    let vocab = load_vocab(&args.data)?;
    let Some(train_posts) = load_split(&args.data, "train")? else {
        bail!("{} has no training split", args.data.display());
    };
    require_labeled(&train_posts, "the training split")?;
    let dev_posts = load_split(&args.data, "dev")?.unwrap_or_default();
    require_labeled(&dev_posts, "the dev split")?;
    let test_posts = load_split(&args.data, "test")?.filter(|t| !t.is_empty() && t.iter().all(|p| p.labeled));
    let train_prepared = prepare_posts(train_posts, &vocab, base.max_len);
    let dev_prepared = prepare_posts(dev_posts, &vocab, base.max_len);
    let test_prepared = test_posts.map(|t| prepare_posts(t, &vocab, base.max_len));

    std::fs::create_dir_all(args.out.join("embeddings")).with_context(|| format!("creating {}", args.out.display()))?;
    let mut sources = Sources::new(embedding_settings.clone(), &vocab, &args.out.join("lm-cache"));
    let mut matrices: BTreeMap<usize, Result<Arc<EmbeddingMatrix>, String>> = BTreeMap::new();
    let mut cells = Vec::with_capacity(selected.len());

    for (variant, embedding) in selected {
        let index = cell_index(variant, embedding);
        let seed = base_seed + index as u64;
        let col = EmbeddingConfig::ALL
            .iter()
            .position(|&e| e == embedding)
            .expect("listed");
        let matrix = matrices
            .entry(col)
            .or_insert_with(|| {
                let m = sources.build(embedding).map_err(|e| format!("{e:#}"))?;
                let path = args.out.join("embeddings").join(format!("{embedding}.emb"));
                save_matrix(&path, &m).map_err(|e| e.to_string())?;
                Ok(Arc::new(m))
            })
            .clone();
        println!("[{}/28] {variant} + {embedding} (seed {seed})", index + 1);
        let config = ModelConfig {
            encoder: variant.encoder(),
            attention: variant.attention(),
            seed,
            ..base.clone()
        };
        let dir = cell_dir(&args.out, variant, embedding);
        let result = matrix.map_err(anyhow::Error::msg).and_then(|m| {
            run_cell(
                &dir,
                config.clone(),
                m,
                &train_prepared,
                &dev_prepared,
                test_prepared.as_deref(),
            )
        });
        let cell = match result {
            Ok((dev_f1, test_f1)) => {
                println!(
                    "    dev F1 {}{}",
                    dev_f1.map_or("-".into(), |f| format!("{f:.3}")),
                    test_f1.map_or(String::new(), |f| format!(", test F1 {f:.3}"))
                );
                AblationCell {
                    variant,
                    embedding,
                    seed,
                    dev_f1,
                    test_f1,
                    error: None,
                }
            }
            Err(e) => {
                let message = format!("{e:#}");
                log::error!("{variant} + {embedding} failed: {message}");
                AblationCell {
                    variant,
                    embedding,
                    seed,
                    dev_f1: None,
                    test_f1: None,
                    error: Some(message),
                }
            }
        };
        cells.push(cell);
    }

    let json_path = args.out.join("ablation.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&cells)? + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;
    let mut report = format!("## Dev\n\n{}", ablation_table(&cells, Split::Dev));
    if test_prepared.is_some() {
        report.push_str(&format!("\n## Test\n\n{}", ablation_table(&cells, Split::Test)));
    }
    let report_path = args.out.join("report.md");
    std::fs::write(&report_path, &report).with_context(|| format!("writing {}", report_path.display()))?;
    println!("\n{report}");

    let failed = cells.iter().filter(|c| c.error.is_some()).count();
    manifest.seed = Some(base_seed);
    manifest.model = Some(base);
    manifest.embedding = Some(embedding_settings);
    manifest
        .input("data", &args.data)
        .output("cells", &json_path)
        .output("report", &report_path)
        .result("requested", cells.len())
        .result("failed", failed);
    manifest.finish(&args.out.join("manifest.json"))?;
    if failed > 0 {
        eprintln!("{failed} of {} cells failed; see {}", cells.len(), json_path.display());
    }
    Ok(failed == 0)
}

fn run_cell(
    dir: &Path,
    config: ModelConfig,
    embeddings: Arc<EmbeddingMatrix>,
    train: &[tsd_core::corpus::PreparedPost],
    dev: &[tsd_core::corpus::PreparedPost],
    test: Option<&[tsd_core::corpus::PreparedPost]>,
) -> Result<(Option<f64>, Option<f64>)> {
    let mut manifest = RunManifest::start("ablate-cell");
    let (model, dev_f1) = train_into(dir, config.clone(), embeddings.clone(), train, dev)?;
    let test_f1 = test
        .map(|t| mean_span_f1(&model, t, DecodeOptions::default()))
        .transpose()?;
    manifest.seed = Some(config.seed);
    manifest.model = Some(config);
    manifest
        .output("final", dir.join("checkpoints").join("final.json"))
        .output("training_log", dir.join("training_log.jsonl"))
        .result("embedding_config", embeddings.config)
        .result("dev_f1", dev_f1)
        .result("test_f1", test_f1);
    manifest.finish(&dir.join("manifest.json"))?;
    Ok((dev_f1, test_f1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_indices_cover_the_grid_once() {
        let mut seen: Vec<usize> = ModelVariant::ALL
            .into_iter()
            .flat_map(|v| EmbeddingConfig::ALL.into_iter().map(move |e| cell_index(v, e)))
            .collect();
        seen.sort();
        assert_eq!(seen, (0..28).collect::<Vec<_>>());
        assert_eq!(cell_index(ModelVariant::BiGruAttention, EmbeddingConfig::Ensemble), 27);
    }
}
