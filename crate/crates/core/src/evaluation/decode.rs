use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metric::{span_f1, SpanPrediction};
use crate::corpus::{PreparedPost, TokenClass, TokenSpan};
use crate::error::Result;
use crate::model::Tagger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecodeOptions {
    /// Also mark the characters between two consecutive toxic tokens.
    pub bridge_gaps: bool,
}

/// Offsets covered by tokens whose class is toxic. Classes beyond the token
/// count (padding) are ignored, as are tokens beyond the class count.
///
/// ```
/// use tsd_core::corpus::{tokenize_post, Post, TokenClass};
/// use tsd_core::evaluation::{decode_spans, DecodeOptions};
///
/// let tokens = tokenize_post(&Post::unlabeled("7", "you fool"));
/// let classes = [TokenClass::NonToxic, TokenClass::Toxic, TokenClass::Pad];
/// let spans = decode_spans("7", &tokens, &classes, DecodeOptions::default());
/// assert_eq!(spans.offsets, [4, 5, 6, 7].into());
/// ```
pub fn decode_spans(
    post_id: &str,
    tokens: &[TokenSpan],
    classes: &[TokenClass],
    options: DecodeOptions,
) -> SpanPrediction {
    let mut offsets = BTreeSet::new();
    let mut previous_toxic: Option<&TokenSpan> = None;
    for (token, &class) in tokens.iter().zip(classes) {
        if class == TokenClass::Toxic {
            if let (true, Some(prev)) = (options.bridge_gaps, previous_toxic) {
                offsets.extend(prev.end..token.start);
            }
            offsets.extend(token.offsets());
            previous_toxic = Some(token);
        } else {
            previous_toxic = None;
        }
    }
    SpanPrediction {
        post_id: post_id.to_string(),
        offsets,
    }
}

/// Runs the tagger over prepared posts and decodes each into offsets.
pub fn predict_spans(tagger: &Tagger, posts: &[PreparedPost], options: DecodeOptions) -> Result<Vec<SpanPrediction>> {
    posts
        .par_iter()
        .map(|p| {
            let out = tagger.predict(&p.encoded)?;
            Ok(decode_spans(&p.post.id, &p.tokens, &out.predicted_class, options))
        })
        .collect()
}

/// Mean span F1 of the tagger's decoded predictions against each post's gold
/// offsets. 0 for an empty slice.
pub fn mean_span_f1(tagger: &Tagger, posts: &[PreparedPost], options: DecodeOptions) -> Result<f64> {
    if posts.is_empty() {
        return Ok(0.0);
    }
    let preds = predict_spans(tagger, posts, options)?;
    let total: f64 = preds
        .iter()
        .zip(posts)
        .map(|(s, p)| span_f1(&s.offsets, &p.post.gold_offsets))
        .sum();
    Ok(total / posts.len() as f64)
}
