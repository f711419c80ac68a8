use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use tsd_core::corpus::Vocabulary;
use tsd_core::embeddings::{
    extract_lm_vectors_cached, fuse, load_glove, save_matrix, EmbeddingConfig, EmbeddingMatrix, GloveVectors,
    LanguageModel, Source, WordVectors,
};

use crate::data::{load_vocab, vocab_path};
use crate::manifest::{manifest_path_for, RunManifest};
use crate::settings::{EmbeddingSettings, SettingsFile, SourceArgs};

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Prepared-data directory (its vocab.txt is used).
    #[arg(long)]
    pub data: PathBuf,
    /// Embedding configuration: GloVe, GPT-2, RoBERTa, RG, GoR, GoG or Ensemble.
    #[arg(long, alias = "embedding")]
    pub config: Option<EmbeddingConfig>,
    #[command(flatten)]
    pub sources: SourceArgs,
    /// Output matrix file [default: DATA/embeddings/CONFIG.emb].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Loads each source at most once and fuses matrices on demand.
pub struct Sources<'a> {
    settings: EmbeddingSettings,
    vocab: &'a Vocabulary,
    cache_dir: PathBuf,
    glove: Option<Result<GloveVectors, String>>,
    gpt2: Option<Result<WordVectors, String>>,
    roberta: Option<Result<WordVectors, String>>,
}

impl<'a> Sources<'a> {
    pub fn new(settings: EmbeddingSettings, vocab: &'a Vocabulary, default_cache: &Path) -> Self {
        let cache_dir = settings.lm_cache.clone().unwrap_or_else(|| default_cache.to_path_buf());
        Sources {
            settings,
            vocab,
            cache_dir,
            glove: None,
            gpt2: None,
            roberta: None,
        }
    }

    fn glove(&mut self) -> Result<&GloveVectors> {
        let (settings, vocab) = (&self.settings, self.vocab);
        self.glove
            .get_or_insert_with(|| {
                let path = settings.glove.as_ref().ok_or("this configuration needs --glove")?;
                log::info!("reading GloVe vectors from {}", path.display());
                load_glove(path, vocab, settings.glove_dim).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| anyhow!("{e}"))
    }

    fn lm(&mut self, model: LanguageModel) -> Result<&WordVectors> {
        let (slot, checkpoint) = match model {
            LanguageModel::Gpt2 => (&mut self.gpt2, &self.settings.gpt2),
            LanguageModel::Roberta => (&mut self.roberta, &self.settings.roberta),
        };
        let (vocab, cache) = (self.vocab, &self.cache_dir);
        slot.get_or_insert_with(|| {
            log::info!("extracting {model} word vectors from `{checkpoint}`");
            extract_lm_vectors_cached(vocab, model, checkpoint, cache).map_err(|e| e.to_string())
        })
        .as_ref()
        .map_err(|e| anyhow!("{e}"))
    }

    pub fn build(&mut self, config: EmbeddingConfig) -> Result<EmbeddingMatrix> {
        for source in config.sources() {
            match source {
                Source::Glove => {
                    self.glove()?;
                }
                Source::Gpt2 => {
                    self.lm(LanguageModel::Gpt2)?;
                }
                Source::Roberta => {
                    self.lm(LanguageModel::Roberta)?;
                }
            }
        }
        let glove = self.glove.as_ref().and_then(|r| r.as_ref().ok());
        Ok(fuse(config, glove, ready(&self.gpt2), ready(&self.roberta))?)
    }
}

fn ready(slot: &Option<Result<WordVectors, String>>) -> Option<&WordVectors> {
    slot.as_ref().and_then(|r| r.as_ref().ok())
}

pub fn run(args: &EmbedArgs, settings: &SettingsFile) -> Result<()> {
    let mut manifest = RunManifest::start("embed");
    let embedding = args.sources.apply(settings.embedding.clone());
    let config = args.config.unwrap_or(embedding.config);
    let embedding = EmbeddingSettings { config, ..embedding };
    let vocab = load_vocab(&args.data)?;
    if config.uses(Source::Glove) && embedding.glove.is_none() {
        bail!("{config} needs a GloVe file (--glove)");
    }
    let mut sources = Sources::new(embedding.clone(), &vocab, &args.data.join("lm-cache"));
    let matrix = sources
        .build(config)
        .with_context(|| format!("building {config} embeddings"))?;

    let out = args
        .out
        .clone()
        .unwrap_or_else(|| args.data.join("embeddings").join(format!("{config}.emb")));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    save_matrix(&out, &matrix)?;
    let words = vocab.num_words();
    let oov = matrix.oov_words();
    println!(
        "{config}: {} rows x width {} (GloVe block {}, LM block {}), written to {}",
        matrix.rows(),
        matrix.width(),
        matrix.glove_dim,
        matrix.lm_dim,
        out.display()
    );
    if config.uses(Source::Glove) {
        println!(
            "GloVe OOV: {oov} of {words} words ({:.1}%)",
            if words == 0 {
                0.0
            } else {
                100.0 * oov as f64 / words as f64
            }
        );
    }
    manifest.embedding = Some(embedding);
    manifest
        .input("vocab", vocab_path(&args.data))
        .output("matrix", &out)
        .result("width", matrix.width())
        .result("rows", matrix.rows())
        .result("oov_words", oov)
        .result("vocab_hash", &matrix.vocab_hash);
    manifest.finish(&manifest_path_for(&out))
}
