//! Toxic spans detection.
//!
//! Posts annotated with toxic character offsets are tokenized with their
//! offsets preserved ([`corpus`]), every vocabulary word gets a fused
//! representation built from GloVe and two pretrained language models
//! ([`embeddings`]), a stacked bidirectional recurrent tagger with
//! self-attention labels each token ([`model`]), and token predictions are
//! turned back into character offsets and scored with span F1
//! ([`evaluation`]).
//!
//! ```
//! use tsd_core::corpus::{Post, tokenize_post};
//! use tsd_core::evaluation::span_f1;
//!
//! let post = Post::new("0", "you are a fool", (10..14).collect())?;
//! let tokens = tokenize_post(&post);
//! let predicted: std::collections::BTreeSet<usize> =
//!     tokens.iter().filter(|t| t.toxic).flat_map(|t| t.offsets()).collect();
//! assert_eq!(span_f1(&predicted, &post.gold_offsets), 1.0);
//! # Ok::<(), tsd_core::Error>(())
//! ```

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod model;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    mod corpus {}
    #[doc = include_str!("../../../book/src/embeddings.md")]
    mod embeddings {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
