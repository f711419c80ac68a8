//! The sequence tagger: frozen embedding lookup, two stacked bidirectional
//! recurrent layers, optional self-attention, a 50-unit tanh layer and a
//! 3-unit output head, applied independently at every position.
//!
//! ```
//! use std::sync::Arc;
//! use tsd_core::corpus::{encode, tokenize_post, Post};
//! use tsd_core::fixtures::{synthetic_vocabulary, toy_embedding};
//! use tsd_core::model::{build_model, ModelConfig, ModelVariant};
//!
//! let vocab = synthetic_vocabulary();
//! let embeddings = Arc::new(toy_embedding(&vocab, 16, 0));
//! let config = ModelConfig { max_len: 12, hidden_size: 8, ..ModelConfig::for_variant(ModelVariant::BiGruAttention) };
//! let tagger = build_model(config, embeddings)?;
//!
//! let post = Post::unlabeled("0", "you are a fool");
//! let encoded = encode(&tokenize_post(&post), &vocab, 12);
//! let out = tagger.predict(&encoded)?;
//! assert_eq!(out.class_scores.dim(), (12, 3));
//! # Ok::<(), tsd_core::Error>(())
//! ```

mod attention;
mod checkpoint;
mod init;
mod loss;
mod optim;
mod params;
mod recurrent;
mod train;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use attention::{self_attention, Attention};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use loss::OutputLoss;
pub use optim::RmsProp;
pub use params::{Linear, TaggerParams};
pub use recurrent::{BiRnnParams, Encoder, RnnParams};
pub use train::{train, EpochRecord, TrainingOutcome};

use crate::corpus::{EncodedPost, TokenClass};
use crate::embeddings::EmbeddingMatrix;
use crate::error::{Error, Result};
use attention::self_attention_backward;
use recurrent::{birnn_backward, birnn_forward, BiRnnCache};

/// The four rows of the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    #[serde(rename = "BiLSTM")]
    BiLstm,
    #[serde(rename = "BiGRU")]
    BiGru,
    #[serde(rename = "BiLSTM+Attention")]
    BiLstmAttention,
    #[serde(rename = "BiGRU+Attention")]
    BiGruAttention,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 4] = [
        ModelVariant::BiLstm,
        ModelVariant::BiGru,
        ModelVariant::BiLstmAttention,
        ModelVariant::BiGruAttention,
    ];

    pub fn new(encoder: Encoder, attention: bool) -> Self {
        match (encoder, attention) {
            (Encoder::BiLstm, false) => ModelVariant::BiLstm,
            (Encoder::BiGru, false) => ModelVariant::BiGru,
            (Encoder::BiLstm, true) => ModelVariant::BiLstmAttention,
            (Encoder::BiGru, true) => ModelVariant::BiGruAttention,
        }
    }

    pub fn encoder(self) -> Encoder {
        match self {
            ModelVariant::BiLstm | ModelVariant::BiLstmAttention => Encoder::BiLstm,
            ModelVariant::BiGru | ModelVariant::BiGruAttention => Encoder::BiGru,
        }
    }

    pub fn attention(self) -> bool {
        matches!(self, ModelVariant::BiLstmAttention | ModelVariant::BiGruAttention)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::BiLstm => "BiLSTM",
            ModelVariant::BiGru => "BiGRU",
            ModelVariant::BiLstmAttention => "BiLSTM+Attention",
            ModelVariant::BiGruAttention => "BiGRU+Attention",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    /// Case-insensitive; spaces around `+` are ignored.
    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect::<String>()
            .to_lowercase();
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name().to_lowercase() == key)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown model variant `{s}` (expected one of BiLSTM, BiGRU, BiLSTM+Attention, BiGRU+Attention)"
                ))
            })
    }
}

impl fmt::Display for Encoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Encoder::BiGru => "BiGRU",
            Encoder::BiLstm => "BiLSTM",
        })
    }
}

/// Architecture and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub encoder: Encoder,
    pub attention: bool,
    pub recurrent_layers: usize,
    /// Units per direction; each bidirectional layer emits twice this.
    pub hidden_size: usize,
    pub dense_units: usize,
    pub num_classes: usize,
    pub max_len: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: RmsProp,
    pub loss: OutputLoss,
    /// Drop probability on the input of the dense layer during training.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: Encoder::BiGru,
            attention: true,
            recurrent_layers: 2,
            hidden_size: 64,
            dense_units: 50,
            num_classes: TokenClass::COUNT,
            max_len: 215,
            batch_size: 32,
            epochs: 10,
            optimizer: RmsProp::default(),
            loss: OutputLoss::default(),
            dropout: 0.0,
            seed: 42,
        }
    }
}

impl ModelConfig {
    pub fn for_variant(variant: ModelVariant) -> Self {
        ModelConfig {
            encoder: variant.encoder(),
            attention: variant.attention(),
            ..ModelConfig::default()
        }
    }

    pub fn variant(&self) -> ModelVariant {
        ModelVariant::new(self.encoder, self.attention)
    }
}

/// Per-position class scores and their argmax.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerOutput {
    /// `max_len × 3`, each entry in (0, 1).
    pub class_scores: Array2<f64>,
    pub predicted_class: Vec<TokenClass>,
}

impl TaggerOutput {
    fn from_scores(class_scores: Array2<f64>) -> Self {
        let predicted_class = class_scores
            .rows()
            .into_iter()
            .map(|row| {
                let best = row
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (k, &s)| if s > acc.1 { (k, s) } else { acc },
                    )
                    .0;
                TokenClass::from_index(best).expect("three output units")
            })
            .collect();
        TaggerOutput {
            class_scores,
            predicted_class,
        }
    }
}

/// Every intermediate activation of one forward pass, for inspection.
#[derive(Debug, Clone)]
pub struct LayerOutputs {
    pub embedded: Array2<f64>,
    pub recurrent: Vec<Array2<f64>>,
    pub attention: Option<Attention>,
    pub dense: Array2<f64>,
    pub logits: Array2<f64>,
}

struct ForwardCache {
    embedded: Array2<f64>,
    recurrent: Vec<(Array2<f64>, BiRnnCache)>,
    attention: Option<Attention>,
    /// Input of the dense layer after dropout.
    dense_input: Array2<f64>,
    /// Inverted-dropout multipliers, when dropout was applied.
    dropout: Option<Array2<f64>>,
    dense: Array2<f64>,
    logits: Array2<f64>,
}

/// A built tagger. Embeddings are shared and never updated.
#[derive(Debug, Clone)]
pub struct Tagger {
    config: ModelConfig,
    params: TaggerParams,
    embeddings: Arc<EmbeddingMatrix>,
}

/// Validates `config` against `embeddings` and initializes parameters from
/// `config.seed`.
pub fn build_model(config: ModelConfig, embeddings: Arc<EmbeddingMatrix>) -> Result<Tagger> {
    validate(&config, &embeddings)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let params = TaggerParams::init(
        config.encoder,
        config.recurrent_layers,
        embeddings.width(),
        config.hidden_size,
        config.dense_units,
        config.num_classes,
        &mut rng,
    );
    Ok(Tagger {
        config,
        params,
        embeddings,
    })
}

fn validate(config: &ModelConfig, embeddings: &EmbeddingMatrix) -> Result<()> {
    let fail = |layer: &str, message: String| {
        Err(Error::Construction {
            layer: layer.to_string(),
            message,
        })
    };
    if config.max_len == 0 {
        return fail("input", "max_len must be positive".into());
    }
    if embeddings.width() == 0 || embeddings.rows() == 0 {
        return fail("embedding", "embedding matrix is empty".into());
    }
    if embeddings.glove_dim + embeddings.lm_dim != embeddings.width() {
        return fail(
            "embedding",
            format!(
                "block widths {} + {} do not add up to the matrix width {}",
                embeddings.glove_dim,
                embeddings.lm_dim,
                embeddings.width()
            ),
        );
    }
    if config.recurrent_layers == 0 {
        return fail("recurrent", "at least one recurrent layer is required".into());
    }
    if config.hidden_size == 0 {
        return fail("recurrent", "hidden_size must be positive".into());
    }
    if config.dense_units == 0 {
        return fail("dense", "dense_units must be positive".into());
    }
    if config.num_classes != TokenClass::COUNT {
        return fail(
            "output",
            format!(
                "the head predicts {} classes, got num_classes = {}",
                TokenClass::COUNT,
                config.num_classes
            ),
        );
    }
    if !(0.0..1.0).contains(&config.dropout) {
        return fail("dropout", format!("rate must be in [0, 1), got {}", config.dropout));
    }
    Ok(())
}

impl Tagger {
    pub(crate) fn from_parts(
        config: ModelConfig,
        params: TaggerParams,
        embeddings: Arc<EmbeddingMatrix>,
    ) -> Result<Self> {
        validate(&config, &embeddings)?;
        Ok(Tagger {
            config,
            params,
            embeddings,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &TaggerParams {
        &self.params
    }

    /// Direct access to the weights, e.g. for perturbation experiments.
    pub fn params_mut(&mut self) -> &mut TaggerParams {
        &mut self.params
    }

    pub fn embeddings(&self) -> &Arc<EmbeddingMatrix> {
        &self.embeddings
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_parameters()
    }

    fn check_input(&self, post: &EncodedPost) -> Result<()> {
        if post.indices.len() != self.config.max_len {
            return Err(Error::Usage(format!(
                "sequence has length {}, the model expects {}",
                post.indices.len(),
                self.config.max_len
            )));
        }
        if let Some(&bad) = post.indices.iter().find(|&&i| i as usize >= self.embeddings.rows()) {
            return Err(Error::Usage(format!(
                "index {bad} is outside the {}-row embedding matrix",
                self.embeddings.rows()
            )));
        }
        Ok(())
    }

    fn embed(&self, indices: &[u32]) -> Array2<f64> {
        let mut x = Array2::zeros((indices.len(), self.embeddings.width()));
        for (mut row, &i) in x.rows_mut().into_iter().zip(indices) {
            row.zip_mut_with(&self.embeddings.row(i as usize), |d, &s| *d = s as f64);
        }
        x
    }

    fn forward(&self, post: &EncodedPost, rng: Option<&mut ChaCha8Rng>) -> ForwardCache {
        let embedded = self.embed(&post.indices);
        let mut recurrent = Vec::with_capacity(self.params.recurrent.len());
        for layer in &self.params.recurrent {
            let input = recurrent
                .last()
                .map_or(embedded.view(), |(h, _): &(Array2<f64>, _)| h.view());
            recurrent.push(birnn_forward(self.config.encoder, layer, input));
        }
        let top = &recurrent.last().expect("at least one layer").0;
        let attention = self.config.attention.then(|| self_attention(top.view(), &post.mask()));
        let mut dense_input = attention.as_ref().map_or_else(|| top.clone(), |a| a.output.clone());
        let dropout = match rng {
            Some(rng) if self.config.dropout > 0.0 => {
                let keep = 1.0 - self.config.dropout;
                let mask = Array2::from_shape_simple_fn(dense_input.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                dense_input *= &mask;
                Some(mask)
            }
            _ => None,
        };
        let dense = self.params.dense.forward(dense_input.view()).mapv(f64::tanh);
        let logits = self.params.output.forward(dense.view());
        ForwardCache {
            embedded,
            recurrent,
            attention,
            dense_input,
            dropout,
            dense,
            logits,
        }
    }

    fn backward(&self, cache: &ForwardCache, d_logits: ArrayView2<f64>) -> TaggerParams {
        let (g_output, d_dense) = self.params.output.backward(cache.dense.view(), d_logits);
        let d_pre = d_dense * &cache.dense.mapv(|a| 1.0 - a * a);
        let (g_dense, mut d_top) = self.params.dense.backward(cache.dense_input.view(), d_pre.view());
        if let Some(mask) = &cache.dropout {
            d_top *= mask;
        }
        let layers = self.params.recurrent.len();
        if let Some(att) = &cache.attention {
            let top = &cache.recurrent[layers - 1].0;
            d_top = self_attention_backward(top.view(), &att.weights, d_top.view());
        }
        let mut g_recurrent = Vec::with_capacity(layers);
        let mut d_h = d_top;
        for l in (0..layers).rev() {
            let (g, dx) = birnn_backward(
                self.config.encoder,
                &self.params.recurrent[l],
                &cache.recurrent[l].1,
                d_h.view(),
                l > 0,
            );
            g_recurrent.push(g);
            if let Some(dx) = dx {
                d_h = dx;
            }
        }
        g_recurrent.reverse();
        TaggerParams {
            recurrent: g_recurrent,
            dense: g_dense,
            output: g_output,
        }
    }

    /// Summed per-position loss of one post against its encoded labels.
    pub fn loss(&self, post: &EncodedPost) -> Result<f64> {
        self.check_input(post)?;
        let cache = self.forward(post, None);
        Ok(self.config.loss.loss_and_grad(cache.logits.view(), &post.labels).0)
    }

    /// Summed per-position loss of one post and its gradient with respect to
    /// every parameter. No dropout.
    pub fn gradient(&self, post: &EncodedPost) -> Result<(f64, TaggerParams)> {
        self.check_input(post)?;
        Ok(self.loss_and_grad(post, None))
    }

    /// Summed per-position loss and its gradient. `rng` enables dropout.
    pub(crate) fn loss_and_grad(&self, post: &EncodedPost, rng: Option<&mut ChaCha8Rng>) -> (f64, TaggerParams) {
        let cache = self.forward(post, rng);
        let (loss, d_logits) = self.config.loss.loss_and_grad(cache.logits.view(), &post.labels);
        (loss, self.backward(&cache, d_logits.view()))
    }

    /// Scores every position of an encoded post. Deterministic.
    pub fn predict(&self, post: &EncodedPost) -> Result<TaggerOutput> {
        self.check_input(post)?;
        let logits = self.forward(post, None).logits;
        let mut scores = Array2::zeros(logits.raw_dim());
        for (mut dst, row) in scores.axis_iter_mut(Axis(0)).zip(logits.rows()) {
            for (d, s) in dst.iter_mut().zip(self.config.loss.scores(row)) {
                *d = s;
            }
        }
        Ok(TaggerOutput::from_scores(scores))
    }

    /// [`predict`](Self::predict) over many posts in parallel; output order
    /// follows input order.
    pub fn predict_batch(&self, posts: &[EncodedPost]) -> Result<Vec<TaggerOutput>> {
        posts.par_iter().map(|p| self.predict(p)).collect()
    }

    /// Runs one forward pass and returns every layer's output.
    pub fn trace(&self, post: &EncodedPost) -> Result<LayerOutputs> {
        self.check_input(post)?;
        let cache = self.forward(post, None);
        Ok(LayerOutputs {
            embedded: cache.embedded,
            recurrent: cache.recurrent.into_iter().map(|(h, _)| h).collect(),
            attention: cache.attention,
            dense: cache.dense,
            logits: cache.logits,
        })
    }
}
