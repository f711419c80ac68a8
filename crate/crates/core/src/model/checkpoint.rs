//! Trained-model files: JSON with the configuration, the vocabulary and
//! embedding identity, and every parameter tensor in a fixed order.

use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelConfig, Tagger, TaggerParams};
use crate::embeddings::{EmbeddingConfig, EmbeddingMatrix};
use crate::error::{Error, Result};

const FORMAT: &str = "tsd-tagger/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub config: ModelConfig,
    pub vocab_hash: String,
    pub embedding_config: EmbeddingConfig,
    pub embedding_width: usize,
    pub tensors: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn of(tagger: &Tagger) -> Self {
        Checkpoint {
            format: FORMAT.to_string(),
            config: tagger.config().clone(),
            vocab_hash: tagger.embeddings().vocab_hash.clone(),
            embedding_config: tagger.embeddings().config,
            embedding_width: tagger.embeddings().width(),
            tensors: tagger.params().slices().into_iter().map(<[f64]>::to_vec).collect(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.format != FORMAT {
            return Err(Error::Integrity(format!(
                "{}: unsupported format `{}`",
                path.display(),
                ck.format
            )));
        }
        Ok(ck)
    }

    /// Rebuilds the tagger on top of `embeddings`, which must be the matrix
    /// the model was trained with.
    pub fn into_tagger(self, embeddings: Arc<EmbeddingMatrix>) -> Result<Tagger> {
        if embeddings.vocab_hash != self.vocab_hash {
            return Err(Error::Integrity(format!(
                "checkpoint was trained on vocabulary {}…, embeddings are for {}…",
                short(&self.vocab_hash),
                short(&embeddings.vocab_hash)
            )));
        }
        if embeddings.config != self.embedding_config || embeddings.width() != self.embedding_width {
            return Err(Error::Integrity(format!(
                "checkpoint expects {} embeddings of width {}, got {} of width {}",
                self.embedding_config,
                self.embedding_width,
                embeddings.config,
                embeddings.width()
            )));
        }
        let c = &self.config;
        let mut params = TaggerParams::init(
            c.encoder,
            c.recurrent_layers,
            self.embedding_width,
            c.hidden_size,
            c.dense_units,
            c.num_classes,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let slots = params.slices_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::Integrity(format!(
                "checkpoint has {} tensors, the configuration needs {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for (k, (dst, src)) in slots.into_iter().zip(&self.tensors).enumerate() {
            if dst.len() != src.len() {
                return Err(Error::Integrity(format!(
                    "tensor {k} has {} values, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(src);
        }
        Tagger::from_parts(self.config, params, embeddings)
    }
}

fn short(hash: &str) -> &str {
    &hash[..12.min(hash.len())]
}

pub fn save_checkpoint(path: impl AsRef<Path>, tagger: &Tagger) -> Result<()> {
    let path = path.as_ref();
    let json = serde_json::to_vec(&Checkpoint::of(tagger))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>, embeddings: Arc<EmbeddingMatrix>) -> Result<Tagger> {
    Checkpoint::read(path)?.into_tagger(embeddings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Vocabulary;
    use crate::fixtures::{synthetic_vocabulary, toy_embedding};
    use crate::model::build_model;

    #[test]
    fn round_trip_is_exact_and_checks_vocabulary() {
        let vocab = synthetic_vocabulary();
        let emb = Arc::new(toy_embedding(&vocab, 6, 2));
        let config = ModelConfig {
            hidden_size: 3,
            max_len: 5,
            ..ModelConfig::default()
        };
        let tagger = build_model(config, emb.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&path, &tagger).unwrap();
        let back = load_checkpoint(&path, emb).unwrap();
        assert_eq!(back.params(), tagger.params());
        assert_eq!(back.config(), tagger.config());

        let other = Arc::new(toy_embedding(&Vocabulary::from_words(["x"]), 6, 2));
        assert!(matches!(load_checkpoint(&path, other), Err(Error::Integrity(_))));
    }
}
