//! Mini-batch training with RMSprop.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::RmsPropState;
use super::{Tagger, TaggerParams};
use crate::corpus::PreparedPost;
use crate::error::{Error, Result};
use crate::evaluation::{mean_span_f1, DecodeOptions};

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean per-position loss over the epoch's batches.
    pub train_loss: f64,
    /// Mean span F1 on the dev split, if one was given.
    pub dev_f1: Option<f64>,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// The model after the last epoch.
    pub model: Tagger,
    /// Snapshot from the epoch with the highest dev F1, with that epoch's number.
    pub best: Option<(usize, Tagger)>,
    pub history: Vec<EpochRecord>,
}

/// Trains `tagger` for `config.epochs` epochs over `train_posts`, reshuffled
/// every epoch with a generator seeded from `config.seed`.
///
/// Each batch minimizes the per-position loss averaged over
/// `batch × max_len` positions, pad positions included. Per-post gradients
/// are computed in parallel and summed in post order, so results do not
/// depend on the thread count. `on_epoch` sees each record as it is made.
pub fn train(
    mut tagger: Tagger,
    train_posts: &[PreparedPost],
    dev_posts: &[PreparedPost],
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainingOutcome> {
    let config = tagger.config().clone();
    if train_posts.is_empty() {
        return Err(Error::Usage("the training set is empty".into()));
    }
    if config.batch_size == 0 || config.epochs == 0 {
        return Err(Error::Usage("batch_size and epochs must be positive".into()));
    }
    for p in train_posts.iter().chain(dev_posts) {
        if p.encoded.max_len() != config.max_len {
            return Err(Error::Usage(format!(
                "post {} is encoded to length {}, the model expects {}",
                p.post.id,
                p.encoded.max_len(),
                config.max_len
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
    let mut optimizer = RmsPropState::new(config.optimizer, tagger.params());
    let mut order: Vec<usize> = (0..train_posts.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, Tagger, f64)> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let dropout_seeds: Vec<Option<u64>> = chunk
                .iter()
                .map(|_| (config.dropout > 0.0).then(|| rng.random()))
                .collect();
            let per_post: Vec<(f64, TaggerParams)> = chunk
                .par_iter()
                .zip(&dropout_seeds)
                .map(|(&i, seed)| {
                    let mut post_rng = seed.map(ChaCha8Rng::seed_from_u64);
                    tagger.loss_and_grad(&train_posts[i].encoded, post_rng.as_mut())
                })
                .collect();
            let positions = (chunk.len() * config.max_len) as f64;
            let mut iter = per_post.into_iter();
            let (first_loss, mut grads) = iter.next().expect("chunks are non-empty");
            let mut loss = first_loss;
            for (l, g) in iter {
                loss += l;
                grads.add_scaled(&g, 1.0);
            }
            loss /= positions;
            grads.scale(1.0 / positions);
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: b + 1,
                    loss,
                });
            }
            optimizer.step(tagger.params_mut(), &grads);
            loss_sum += loss;
            batches += 1;
        }
        let dev_f1 = if dev_posts.is_empty() {
            None
        } else {
            Some(mean_span_f1(&tagger, dev_posts, DecodeOptions::default())?)
        };
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            dev_f1,
            wall_time_secs: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}/{}: loss {:.5}{}",
            config.epochs,
            record.train_loss,
            dev_f1.map_or(String::new(), |f| format!(", dev F1 {f:.4}"))
        );
        on_epoch(&record);
        if let Some(f) = dev_f1 {
            if best.as_ref().is_none_or(|(_, _, b)| f > *b) {
                best = Some((epoch, tagger.clone(), f));
            }
        }
        history.push(record);
    }
    Ok(TrainingOutcome {
        model: tagger,
        best: best.map(|(e, t, _)| (e, t)),
        history,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::corpus::{prepare_posts, Post, TokenClass};
    use crate::fixtures::{synthetic_posts, synthetic_vocabulary, toy_embedding};
    use crate::model::{build_model, ModelConfig, OutputLoss};

    fn setup(n: usize, config: ModelConfig) -> (Tagger, Vec<PreparedPost>) {
        let vocab = synthetic_vocabulary();
        let emb = Arc::new(toy_embedding(&vocab, 16, 5));
        let posts = prepare_posts(synthetic_posts(n, 1), &vocab, config.max_len);
        (build_model(config, emb).unwrap(), posts)
    }

    fn small() -> ModelConfig {
        ModelConfig {
            hidden_size: 8,
            max_len: 14,
            batch_size: 4,
            epochs: 3,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn same_seed_same_losses() {
        let (a, posts) = setup(12, small());
        let (b, _) = setup(12, small());
        let ra = train(a, &posts, &posts[..3], |_| {}).unwrap();
        let rb = train(b, &posts, &posts[..3], |_| {}).unwrap();
        let losses = |r: &TrainingOutcome| r.history.iter().map(|e| e.train_loss).collect::<Vec<_>>();
        assert_eq!(losses(&ra), losses(&rb));
        assert_eq!(ra.model.params(), rb.model.params());
        assert!(ra.best.is_some());
    }

    #[test]
    fn dropout_is_seeded_too() {
        let config = ModelConfig {
            dropout: 0.3,
            ..small()
        };
        let (a, posts) = setup(8, config.clone());
        let (b, _) = setup(8, config);
        let ra = train(a, &posts, &[], |_| {}).unwrap();
        let rb = train(b, &posts, &[], |_| {}).unwrap();
        assert_eq!(ra.model.params(), rb.model.params());
        assert!(ra.best.is_none());
    }

    #[test]
    fn empty_training_set_is_usage_error() {
        let (t, _) = setup(1, small());
        assert!(matches!(train(t, &[], &[], |_| {}), Err(Error::Usage(_))));
    }

    #[test]
    fn divergence_is_reported_with_position() {
        let (mut t, posts) = setup(4, small());
        t.params_mut().output.bias[0] = f64::NAN;
        match train(t, &posts, &[], |_| {}) {
            Err(Error::Divergence { epoch, batch, .. }) => assert_eq!((epoch, batch), (1, 1)),
            other => panic!("{other:?}"),
        }
    }

    fn memorize(loss: OutputLoss, learning_rate: f64) -> (Vec<EpochRecord>, crate::model::TaggerOutput) {
        let vocab = synthetic_vocabulary();
        let emb = Arc::new(toy_embedding(&vocab, 16, 5));
        let post = Post::new("0", "you are a fool", (10..14).collect()).unwrap();
        let prepared = prepare_posts(vec![post], &vocab, 6);
        let config = ModelConfig {
            hidden_size: 8,
            max_len: 6,
            batch_size: 1,
            epochs: 600,
            loss,
            optimizer: crate::model::RmsProp {
                learning_rate,
                ..Default::default()
            },
            ..ModelConfig::default()
        };
        let out = train(build_model(config, emb).unwrap(), &prepared, &[], |_| {}).unwrap();
        let pred = out.model.predict(&prepared[0].encoded).unwrap();
        (out.history, pred)
    }

    #[test]
    fn memorizes_a_single_post() {
        for (loss, lr) in [(OutputLoss::SigmoidNormalized, 3e-3), (OutputLoss::Softmax, 1e-3)] {
            let (history, pred) = memorize(loss, lr);
            assert!(
                history.last().unwrap().train_loss < 0.01,
                "{loss:?}: {:?}",
                history.last()
            );
            assert_eq!(pred.predicted_class[3], TokenClass::Toxic);
            assert_eq!(pred.predicted_class[0], TokenClass::NonToxic);
            assert_eq!(pred.predicted_class[5], TokenClass::Pad);
        }
    }

    #[test]
    fn sigmoid_head_can_stall_with_two_saturated_units() {
        // the true unit and a wrong unit both reach σ ≈ 1: the normalized
        // loss sits at ln 2 and its gradient vanishes
        let (history, pred) = memorize(OutputLoss::SigmoidNormalized, 1e-3);
        let stalled = history.last().unwrap().train_loss * 6.0;
        assert!((stalled - 2f64.ln()).abs() < 1e-3, "{stalled}");
        assert!(pred.class_scores[[3, 0]] > 0.999 && pred.class_scores[[3, 2]] > 0.999);
    }
}
