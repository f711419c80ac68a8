//! Word representations for the tagger.
//!
//! Three per-word sources are available: GloVe vectors (300 columns, zero for
//! words GloVe does not know) and the static input-embedding tables of GPT-2
//! and RoBERTa (768 columns each, mean-pooled over the word's subwords). The
//! seven named configurations combine them as follows:
//!
//! | name       | layout                         | width |
//! |------------|--------------------------------|-------|
//! | `GloVe`    | GloVe                          | 300   |
//! | `GPT-2`    | GPT-2                          | 768   |
//! | `RoBERTa`  | RoBERTa                        | 768   |
//! | `RG`       | RoBERTa + GPT-2                | 768   |
//! | `GoR`      | GloVe ⊕ RoBERTa                | 1068  |
//! | `GoG`      | GloVe ⊕ GPT-2                  | 1068  |
//! | `Ensemble` | GloVe ⊕ (GPT-2 + RoBERTa)      | 1068  |
//!
//! `+` is element-wise addition and `⊕` concatenation, GloVe block first.

mod glove;
mod lm;
mod store;

use std::fmt;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::corpus::{Vocabulary, PAD_INDEX};
use crate::error::{Error, Result};

pub use glove::{load_glove, load_glove_reader, GloveVectors, GLOVE_DIM};
pub use lm::{
    extract_lm_vectors, extract_lm_vectors_cached, hub_cache_dir, offline_mode, resolve_checkpoint, LanguageModel,
    SubwordEmbedder, LM_DIM,
};
pub use store::{load_matrix, save_matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Source {
    Glove,
    Gpt2,
    Roberta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fusion {
    /// One source used as-is.
    Single,
    /// Element-wise sum of the two LM blocks.
    Sum,
    /// GloVe block followed by one LM block.
    Concat,
    /// GloVe block followed by the sum of both LM blocks.
    SumThenConcat,
}

/// The seven embedding configurations of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EmbeddingConfig {
    #[serde(rename = "GloVe")]
    Glove,
    #[serde(rename = "GPT-2")]
    Gpt2,
    #[serde(rename = "RoBERTa")]
    Roberta,
    #[serde(rename = "RG")]
    RobertaGpt2,
    #[serde(rename = "GoR")]
    GloveRoberta,
    #[serde(rename = "GoG")]
    GloveGpt2,
    #[serde(rename = "Ensemble")]
    Ensemble,
}

impl EmbeddingConfig {
    /// Column order of the ablation table.
    pub const ALL: [EmbeddingConfig; 7] = [
        EmbeddingConfig::Glove,
        EmbeddingConfig::Gpt2,
        EmbeddingConfig::Roberta,
        EmbeddingConfig::RobertaGpt2,
        EmbeddingConfig::GloveRoberta,
        EmbeddingConfig::GloveGpt2,
        EmbeddingConfig::Ensemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EmbeddingConfig::Glove => "GloVe",
            EmbeddingConfig::Gpt2 => "GPT-2",
            EmbeddingConfig::Roberta => "RoBERTa",
            EmbeddingConfig::RobertaGpt2 => "RG",
            EmbeddingConfig::GloveRoberta => "GoR",
            EmbeddingConfig::GloveGpt2 => "GoG",
            EmbeddingConfig::Ensemble => "Ensemble",
        }
    }

    pub fn sources(self) -> &'static [Source] {
        use Source::*;
        match self {
            EmbeddingConfig::Glove => &[Glove],
            EmbeddingConfig::Gpt2 => &[Gpt2],
            EmbeddingConfig::Roberta => &[Roberta],
            EmbeddingConfig::RobertaGpt2 => &[Gpt2, Roberta],
            EmbeddingConfig::GloveRoberta => &[Glove, Roberta],
            EmbeddingConfig::GloveGpt2 => &[Glove, Gpt2],
            EmbeddingConfig::Ensemble => &[Glove, Gpt2, Roberta],
        }
    }

    pub fn uses(self, source: Source) -> bool {
        self.sources().contains(&source)
    }

    pub fn fusion(self) -> Fusion {
        match self {
            EmbeddingConfig::Glove | EmbeddingConfig::Gpt2 | EmbeddingConfig::Roberta => Fusion::Single,
            EmbeddingConfig::RobertaGpt2 => Fusion::Sum,
            EmbeddingConfig::GloveRoberta | EmbeddingConfig::GloveGpt2 => Fusion::Concat,
            EmbeddingConfig::Ensemble => Fusion::SumThenConcat,
        }
    }

    /// Widths of the (GloVe, LM) column blocks given the source dimensions.
    pub fn block_widths(self, glove_dim: usize, lm_dim: usize) -> (usize, usize) {
        let g = if self.uses(Source::Glove) { glove_dim } else { 0 };
        let l = if self.uses(Source::Gpt2) || self.uses(Source::Roberta) {
            lm_dim
        } else {
            0
        };
        (g, l)
    }

    pub fn width(self, glove_dim: usize, lm_dim: usize) -> usize {
        let (g, l) = self.block_widths(glove_dim, lm_dim);
        g + l
    }
}

impl fmt::Display for EmbeddingConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EmbeddingConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        EmbeddingConfig::ALL
            .into_iter()
            .find(|c| c.name().to_ascii_lowercase().replace('-', "") == key)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown embedding config `{s}` (expected one of GloVe, GPT-2, RoBERTa, RG, GoR, GoG, Ensemble)"
                ))
            })
    }
}

/// One vector per vocabulary row from a single source. Reserved rows are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub vectors: Array2<f32>,
    pub vocab_hash: String,
}

impl WordVectors {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn rows(&self) -> usize {
        self.vectors.nrows()
    }
}

/// The fused `|V| × width` table fed to the tagger, frozen during training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingMatrix {
    pub config: EmbeddingConfig,
    pub vocab_hash: String,
    /// Width of the leading GloVe block (0 when the config has none).
    pub glove_dim: usize,
    /// Width of the trailing LM block (0 when the config has none).
    pub lm_dim: usize,
    /// True where the row's word is absent from GloVe and its GloVe block is
    /// zero. All false for configs without a GloVe block.
    pub oov_mask: Vec<bool>,
    #[serde(skip)]
    pub matrix: Array2<f32>,
}

impl EmbeddingMatrix {
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn width(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn row(&self, index: usize) -> ArrayView1<'_, f32> {
        self.matrix.row(index)
    }

    /// Matrix built directly from a table, for toy setups and tests.
    pub fn from_table(config: EmbeddingConfig, vocab: &Vocabulary, mut matrix: Array2<f32>) -> Result<Self> {
        if matrix.nrows() != vocab.len() {
            return Err(Error::Config(format!(
                "table has {} rows but the vocabulary has {}",
                matrix.nrows(),
                vocab.len()
            )));
        }
        matrix.row_mut(PAD_INDEX as usize).fill(0.0);
        let width = matrix.ncols();
        let (glove_dim, lm_dim) = match config.fusion() {
            Fusion::Single if config.uses(Source::Glove) => (width, 0),
            _ => (0, width),
        };
        Ok(EmbeddingMatrix {
            config,
            vocab_hash: vocab.hash(),
            glove_dim,
            lm_dim,
            oov_mask: vec![false; matrix.nrows()],
            matrix,
        })
    }

    /// Number of word rows (reserved rows excluded) flagged OOV.
    pub fn oov_words(&self) -> usize {
        self.oov_mask
            .iter()
            .skip(crate::corpus::RESERVED)
            .filter(|&&m| m)
            .count()
    }
}

/// Assembles one fused row for `config` from whichever source vectors apply.
///
/// Missing LM vectors contribute zeros; this is what unknown-at-inference
/// words get when no language model is at hand.
pub fn fuse_row<'a>(
    config: EmbeddingConfig,
    glove: Option<ArrayView1<'a, f32>>,
    gpt2: Option<ArrayView1<'a, f32>>,
    roberta: Option<ArrayView1<'a, f32>>,
    glove_dim: usize,
    lm_dim: usize,
) -> Vec<f32> {
    let (g, l) = config.block_widths(glove_dim, lm_dim);
    let mut row = vec![0.0f32; g + l];
    if g > 0 {
        if let Some(v) = glove {
            row[..g].iter_mut().zip(v.iter()).for_each(|(r, x)| *r = *x);
        }
    }
    for (source, vec) in [(Source::Gpt2, gpt2), (Source::Roberta, roberta)] {
        if !config.uses(source) {
            continue;
        }
        if let Some(v) = vec {
            row[g..].iter_mut().zip(v.iter()).for_each(|(r, x)| *r += *x);
        }
    }
    row
}

/// Builds the embedding matrix for `config` from per-source vectors.
///
/// Every source the configuration names must be supplied and aligned with
/// the same vocabulary. The padding row is zeroed after assembly.
pub fn fuse(
    config: EmbeddingConfig,
    glove: Option<&GloveVectors>,
    gpt2: Option<&WordVectors>,
    roberta: Option<&WordVectors>,
) -> Result<EmbeddingMatrix> {
    let need = |source: Source, present: bool| {
        if config.uses(source) && !present {
            Err(Error::Config(format!("config {config} requires {source:?} vectors")))
        } else {
            Ok(())
        }
    };
    need(Source::Glove, glove.is_some())?;
    need(Source::Gpt2, gpt2.is_some())?;
    need(Source::Roberta, roberta.is_some())?;

    let glove = glove.filter(|_| config.uses(Source::Glove));
    let gpt2 = gpt2.filter(|_| config.uses(Source::Gpt2));
    let roberta = roberta.filter(|_| config.uses(Source::Roberta));

    let mut hashes = Vec::new();
    let mut rows = Vec::new();
    if let Some(g) = glove {
        hashes.push(&g.vectors.vocab_hash);
        rows.push(g.vectors.rows());
    }
    for v in [gpt2, roberta].into_iter().flatten() {
        hashes.push(&v.vocab_hash);
        rows.push(v.rows());
    }
    if hashes.windows(2).any(|w| w[0] != w[1]) || rows.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Config(
            "embedding sources were built against different vocabularies".into(),
        ));
    }
    let (n, vocab_hash) = (rows[0], hashes[0].clone());

    let lm_dims: Vec<usize> = [gpt2, roberta].into_iter().flatten().map(WordVectors::dim).collect();
    if lm_dims.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Config(format!("LM widths differ: {lm_dims:?}")));
    }
    let glove_dim = glove.map_or(0, |g| g.vectors.dim());
    let lm_dim = lm_dims.first().copied().unwrap_or(0);

    let mut matrix = Array2::<f32>::zeros((n, glove_dim + lm_dim));
    for i in 0..n {
        let row = fuse_row(
            config,
            glove.map(|g| g.vectors.vectors.row(i)),
            gpt2.map(|v| v.vectors.row(i)),
            roberta.map(|v| v.vectors.row(i)),
            glove_dim,
            lm_dim,
        );
        matrix.row_mut(i).iter_mut().zip(row).for_each(|(m, x)| *m = x);
    }
    let oov_mask = match glove {
        Some(g) => g.found.iter().map(|f| !f).collect(),
        None => vec![false; n],
    };
    for (i, oov) in oov_mask.iter().enumerate() {
        if *oov {
            matrix.slice_mut(s![i, ..glove_dim]).fill(0.0);
        }
    }
    matrix.row_mut(PAD_INDEX as usize).fill(0.0);

    Ok(EmbeddingMatrix {
        config,
        vocab_hash,
        glove_dim,
        lm_dim,
        oov_mask,
        matrix,
    })
}
