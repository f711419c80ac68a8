//! Resolution of settings: command-line flags override the TOML settings
//! file, which overrides built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use tsd_core::embeddings::{EmbeddingConfig, GLOVE_DIM};
use tsd_core::model::{ModelConfig, ModelVariant, OutputLoss};

/// Contents of a `--settings` file.
///
/// ```toml
/// [model]
/// encoder = "BiGRU"
/// attention = true
/// hidden_size = 64
/// epochs = 10
///
/// [model.optimizer]
/// learning_rate = 0.001
///
/// [embedding]
/// config = "Ensemble"
/// glove = "glove.840B.300d.txt"
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsFile {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub embedding: EmbeddingSettings,
}

impl SettingsFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(SettingsFile::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading settings {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing settings {}", path.display()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSettings {
    pub config: EmbeddingConfig,
    pub glove: Option<PathBuf>,
    pub glove_dim: usize,
    /// Hub name or local directory.
    pub gpt2: String,
    pub roberta: String,
    /// Where extracted LM word vectors are cached.
    pub lm_cache: Option<PathBuf>,
}

impl Default for EmbeddingSettings {
    fn default() -> Self {
        EmbeddingSettings {
            config: EmbeddingConfig::Ensemble,
            glove: None,
            glove_dim: GLOVE_DIM,
            gpt2: "gpt2".into(),
            roberta: "roberta-base".into(),
            lm_cache: None,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SourceArgs {
    /// GloVe text file.
    #[arg(long)]
    pub glove: Option<PathBuf>,
    /// Vector width of the GloVe file.
    #[arg(long)]
    pub glove_dim: Option<usize>,
    /// GPT-2 checkpoint: hub name or directory with tokenizer.json and model.safetensors.
    #[arg(long)]
    pub gpt2: Option<String>,
    /// RoBERTa checkpoint: hub name or directory.
    #[arg(long)]
    pub roberta: Option<String>,
    /// Cache directory for extracted LM word vectors.
    #[arg(long)]
    pub lm_cache: Option<PathBuf>,
}

impl SourceArgs {
    pub fn apply(&self, mut s: EmbeddingSettings) -> EmbeddingSettings {
        if let Some(v) = &self.glove {
            s.glove = Some(v.clone());
        }
        if let Some(v) = self.glove_dim {
            s.glove_dim = v;
        }
        if let Some(v) = &self.gpt2 {
            s.gpt2 = v.clone();
        }
        if let Some(v) = &self.roberta {
            s.roberta = v.clone();
        }
        if let Some(v) = &self.lm_cache {
            s.lm_cache = Some(v.clone());
        }
        s
    }
}

fn parse_loss(s: &str) -> Result<OutputLoss, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown loss `{s}` (expected sigmoid-normalized, sigmoid-true-class or softmax)"))
}

#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// BiLSTM, BiGRU, BiLSTM+Attention or BiGRU+Attention.
    #[arg(long)]
    pub variant: Option<ModelVariant>,
    /// Recurrent units per direction.
    #[arg(long)]
    pub hidden_size: Option<usize>,
    /// Units of the tanh layer before the output.
    #[arg(long)]
    pub dense_units: Option<usize>,
    /// Padded sequence length in tokens.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// RMSprop step size.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// sigmoid-normalized, sigmoid-true-class or softmax.
    #[arg(long, value_parser = parse_loss)]
    pub loss: Option<OutputLoss>,
    /// Drop probability before the tanh layer, training only.
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ModelArgs {
    pub fn apply(&self, mut c: ModelConfig) -> ModelConfig {
        if let Some(v) = self.variant {
            c.encoder = v.encoder();
            c.attention = v.attention();
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        set!(
            hidden_size,
            dense_units,
            max_len,
            batch_size,
            epochs,
            loss,
            dropout,
            seed
        );
        if let Some(v) = self.learning_rate {
            c.optimizer.learning_rate = v;
        }
        c
    }
}

/// Parses `Variant:Embedding`, e.g. `BiGRU+Attention:Ensemble`.
pub fn parse_cell(s: &str) -> Result<(ModelVariant, EmbeddingConfig)> {
    let Some((v, e)) = s.rsplit_once(':') else {
        bail!("cell `{s}` must look like MODEL:EMBEDDING, e.g. BiGRU+Attention:Ensemble");
    };
    Ok((v.parse()?, e.parse()?))
}
