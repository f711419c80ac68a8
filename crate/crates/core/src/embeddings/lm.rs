//! Static word vectors from pretrained language models.
//!
//! A word is run through the model's own subword tokenizer in isolation, each
//! subword id is looked up in the model's input-embedding table, and the rows
//! are averaged. No context and no transformer layers are involved, so the
//! result is one fixed vector per vocabulary word.
//!
//! A checkpoint is a directory holding `tokenizer.json` and
//! `model.safetensors`. It can be named by path, or by hub repository id, in
//! which case it is looked up in the local hub cache (and fetched into it
//! unless offline mode is on).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use safetensors::{Dtype, SafeTensors};
use serde::{Deserialize, Serialize};
use tokenizers::Tokenizer;

use super::{store, WordVectors};
use crate::corpus::{Vocabulary, RESERVED};
use crate::error::{Error, Result};

/// Hidden width of the base-size checkpoints.
pub const LM_DIM: usize = 768;

const TOKENIZER_FILE: &str = "tokenizer.json";
const WEIGHTS_FILE: &str = "model.safetensors";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LanguageModel {
    Gpt2,
    Roberta,
}

impl LanguageModel {
    pub fn default_checkpoint(self) -> &'static str {
        match self {
            LanguageModel::Gpt2 => "gpt2",
            LanguageModel::Roberta => "roberta-base",
        }
    }

    fn unk_token(self) -> &'static str {
        match self {
            LanguageModel::Gpt2 => "<|endoftext|>",
            LanguageModel::Roberta => "<unk>",
        }
    }

    fn table_names(self) -> &'static [&'static str] {
        match self {
            LanguageModel::Gpt2 => &["wte.weight", "transformer.wte.weight"],
            LanguageModel::Roberta => &[
                "embeddings.word_embeddings.weight",
                "roberta.embeddings.word_embeddings.weight",
            ],
        }
    }

    fn table_suffix(self) -> &'static str {
        match self {
            LanguageModel::Gpt2 => "wte.weight",
            LanguageModel::Roberta => "word_embeddings.weight",
        }
    }
}

impl fmt::Display for LanguageModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LanguageModel::Gpt2 => "GPT-2",
            LanguageModel::Roberta => "RoBERTa",
        })
    }
}

impl FromStr for LanguageModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "gpt2" => Ok(LanguageModel::Gpt2),
            "roberta" => Ok(LanguageModel::Roberta),
            _ => Err(Error::Config(format!("unknown language model `{s}`"))),
        }
    }
}

/// A subword tokenizer paired with its input-embedding table.
pub struct SubwordEmbedder {
    pub model: LanguageModel,
    tokenizer: Tokenizer,
    table: Array2<f32>,
    unk_id: Option<u32>,
}

impl fmt::Debug for SubwordEmbedder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SubwordEmbedder")
            .field("model", &self.model)
            .field("table", &self.table.dim())
            .finish()
    }
}

impl SubwordEmbedder {
    pub fn new(model: LanguageModel, tokenizer: Tokenizer, table: Array2<f32>) -> Self {
        let unk_id = tokenizer.token_to_id(model.unk_token());
        SubwordEmbedder {
            model,
            tokenizer,
            table,
            unk_id,
        }
    }

    /// Loads `tokenizer.json` and the embedding table from `model.safetensors`.
    pub fn from_dir(model: LanguageModel, dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let tok_path = dir.join(TOKENIZER_FILE);
        let tokenizer = Tokenizer::from_file(&tok_path)
            .map_err(|e| Error::Environment(format!("cannot load {}: {e}", tok_path.display())))?;
        let weights_path = dir.join(WEIGHTS_FILE);
        let bytes = std::fs::read(&weights_path).map_err(|e| Error::io(&weights_path, e))?;
        let table =
            read_table(model, &bytes).map_err(|e| Error::Environment(format!("{}: {e}", weights_path.display())))?;
        Ok(SubwordEmbedder::new(model, tokenizer, table))
    }

    /// Resolves a checkpoint name or path and loads it.
    pub fn load(model: LanguageModel, checkpoint: &str) -> Result<Self> {
        let dir = resolve_checkpoint(checkpoint)?;
        Self::from_dir(model, dir)
    }

    pub fn dim(&self) -> usize {
        self.table.ncols()
    }

    /// Subword ids for `word` on its own, without special tokens.
    pub fn subword_ids(&self, word: &str) -> Result<Vec<u32>> {
        let enc = self
            .tokenizer
            .encode(word, false)
            .map_err(|e| Error::Environment(format!("{} tokenizer failed on `{word}`: {e}", self.model)))?;
        Ok(enc.get_ids().to_vec())
    }

    /// Mean of the table rows of `word`'s subwords. Falls back to the unknown
    /// token's row (or zeros, if the tokenizer has none) when the word yields
    /// no usable subword.
    pub fn word_vector(&self, word: &str) -> Result<Array1<f32>> {
        let ids: Vec<usize> = self
            .subword_ids(word)?
            .into_iter()
            .map(|i| i as usize)
            .filter(|&i| i < self.table.nrows())
            .collect();
        if ids.is_empty() {
            return Ok(match self.unk_id {
                Some(u) if (u as usize) < self.table.nrows() => self.table.row(u as usize).to_owned(),
                _ => Array1::zeros(self.dim()),
            });
        }
        let rows = self.table.select(Axis(0), &ids);
        Ok(rows.mean_axis(Axis(0)).expect("non-empty"))
    }
}

fn read_table(model: LanguageModel, bytes: &[u8]) -> std::result::Result<Array2<f32>, String> {
    let tensors = SafeTensors::deserialize(bytes).map_err(|e| e.to_string())?;
    let names = tensors.names();
    let name = model
        .table_names()
        .iter()
        .find(|n| names.iter().any(|m| m == *n))
        .map(|n| n.to_string())
        .or_else(|| {
            names
                .iter()
                .find(|n| n.ends_with(model.table_suffix()))
                .map(|n| n.to_string())
        })
        .ok_or_else(|| format!("no `{}` tensor found", model.table_suffix()))?;
    let view = tensors.tensor(&name).map_err(|e| e.to_string())?;
    let shape = view.shape();
    if shape.len() != 2 {
        return Err(format!("`{name}` has shape {shape:?}, expected 2-D"));
    }
    let data = view.data();
    let values: Vec<f32> = match view.dtype() {
        Dtype::F32 => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
        Dtype::BF16 => data
            .chunks_exact(2)
            .map(|c| f32::from_bits((u16::from_le_bytes([c[0], c[1]]) as u32) << 16))
            .collect(),
        other => return Err(format!("`{name}` has unsupported dtype {other:?}")),
    };
    Array2::from_shape_vec((shape[0], shape[1]), values).map_err(|e| e.to_string())
}

/// One mean-pooled vector per vocabulary word; reserved rows stay zero.
pub fn extract_lm_vectors(vocab: &Vocabulary, embedder: &SubwordEmbedder) -> Result<WordVectors> {
    let rows: Vec<Array1<f32>> = vocab
        .words()
        .par_iter()
        .skip(RESERVED)
        .map(|w| embedder.word_vector(w))
        .collect::<Result<_>>()?;
    let mut vectors = Array2::<f32>::zeros((vocab.len(), embedder.dim()));
    for (i, row) in rows.into_iter().enumerate() {
        vectors.row_mut(i + RESERVED).assign(&row);
    }
    Ok(WordVectors {
        vectors,
        vocab_hash: vocab.hash(),
    })
}

/// Like [`extract_lm_vectors`], memoized on disk under `cache_dir` by
/// (vocabulary hash, model, checkpoint name). The checkpoint is only loaded on
/// a cache miss.
pub fn extract_lm_vectors_cached(
    vocab: &Vocabulary,
    model: LanguageModel,
    checkpoint: &str,
    cache_dir: &Path,
) -> Result<WordVectors> {
    let hash = vocab.hash();
    let tag: String = checkpoint
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect();
    let path = cache_dir.join(format!("{model:?}-{tag}-{}.lmvec", &hash[..16]).to_lowercase());
    if path.exists() {
        let (header, vectors) = store::read_table(&path)?;
        if header.vocab_hash == hash && vectors.nrows() == vocab.len() {
            log::info!("using cached {model} vectors from {}", path.display());
            return Ok(WordVectors {
                vectors,
                vocab_hash: hash,
            });
        }
        log::warn!("ignoring stale cache file {}", path.display());
    }
    let embedder = SubwordEmbedder::load(model, checkpoint)?;
    let vectors = extract_lm_vectors(vocab, &embedder)?;
    std::fs::create_dir_all(cache_dir).map_err(|e| Error::io(cache_dir, e))?;
    store::write_table(
        &path,
        &store::TableHeader::new(format!("{model}:{checkpoint}"), &hash, &vectors.vectors),
        &vectors.vectors,
    )?;
    Ok(vectors)
}

/// Hub cache root: `TSD_HUB_CACHE`, then `HF_HUB_CACHE`, then `HF_HOME/hub`,
/// then `~/.cache/huggingface/hub`.
pub fn hub_cache_dir() -> PathBuf {
    let var = |k: &str| std::env::var_os(k).filter(|v| !v.is_empty()).map(PathBuf::from);
    var("TSD_HUB_CACHE")
        .or_else(|| var("HF_HUB_CACHE"))
        .or_else(|| var("HF_HOME").map(|h| h.join("hub")))
        .or_else(|| var("HOME").map(|h| h.join(".cache").join("huggingface").join("hub")))
        .unwrap_or_else(|| PathBuf::from(".hub-cache"))
}

/// `TSD_OFFLINE` or `HF_HUB_OFFLINE` set to a truthy value disables fetching.
pub fn offline_mode() -> bool {
    ["TSD_OFFLINE", "HF_HUB_OFFLINE"].iter().any(|k| {
        std::env::var(k)
            .map(|v| matches!(v.to_ascii_lowercase().as_str(), "1" | "true" | "yes" | "on"))
            .unwrap_or(false)
    })
}

fn has_checkpoint(dir: &Path) -> bool {
    dir.join(TOKENIZER_FILE).is_file() && dir.join(WEIGHTS_FILE).is_file()
}

fn cached_snapshot(repo_dir: &Path) -> Option<PathBuf> {
    let snapshots = repo_dir.join("snapshots");
    if let Ok(rev) = std::fs::read_to_string(repo_dir.join("refs").join("main")) {
        let dir = snapshots.join(rev.trim());
        if has_checkpoint(&dir) {
            return Some(dir);
        }
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(&snapshots)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| has_checkpoint(p))
        .collect();
    dirs.sort();
    dirs.into_iter().next()
}

/// Maps a checkpoint name to a directory holding the tokenizer and weights.
pub fn resolve_checkpoint(checkpoint: &str) -> Result<PathBuf> {
    let as_path = Path::new(checkpoint);
    if as_path.is_dir() {
        if has_checkpoint(as_path) {
            return Ok(as_path.to_path_buf());
        }
        return Err(Error::Environment(format!(
            "{} lacks {TOKENIZER_FILE} or {WEIGHTS_FILE}",
            as_path.display()
        )));
    }
    let repo_dir = hub_cache_dir().join(format!("models--{}", checkpoint.replace('/', "--")));
    if let Some(dir) = cached_snapshot(&repo_dir) {
        return Ok(dir);
    }
    if offline_mode() {
        return Err(Error::Environment(format!(
            "checkpoint `{checkpoint}` is not in the hub cache {} and offline mode is on",
            repo_dir.display()
        )));
    }
    fetch(checkpoint, &repo_dir)
}

#[cfg(feature = "hub")]
fn fetch(checkpoint: &str, repo_dir: &Path) -> Result<PathBuf> {
    let endpoint = std::env::var("HF_ENDPOINT").unwrap_or_else(|_| "https://huggingface.co".into());
    let dir = repo_dir.join("snapshots").join("main");
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for file in [TOKENIZER_FILE, WEIGHTS_FILE] {
        let target = dir.join(file);
        if target.is_file() {
            continue;
        }
        let url = format!("{endpoint}/{checkpoint}/resolve/main/{file}");
        log::info!("fetching {url}");
        let response = ureq::get(&url)
            .call()
            .map_err(|e| Error::Environment(format!("cannot fetch {url}: {e}")))?;
        let partial = target.with_extension("part");
        let mut out = std::fs::File::create(&partial).map_err(|e| Error::io(&partial, e))?;
        std::io::copy(&mut response.into_reader(), &mut out).map_err(|e| Error::io(&partial, e))?;
        std::fs::rename(&partial, &target).map_err(|e| Error::io(&target, e))?;
    }
    let refs = repo_dir.join("refs");
    std::fs::create_dir_all(&refs).map_err(|e| Error::io(&refs, e))?;
    std::fs::write(refs.join("main"), "main").map_err(|e| Error::io(&refs, e))?;
    Ok(dir)
}

#[cfg(not(feature = "hub"))]
fn fetch(checkpoint: &str, repo_dir: &Path) -> Result<PathBuf> {
    Err(Error::Environment(format!(
        "checkpoint `{checkpoint}` is not in the hub cache {} (built without the `hub` feature)",
        repo_dir.display()
    )))
}
