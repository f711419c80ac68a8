//! Synthetic data for smoke runs, examples and tests.
//!
//! Nothing here touches the real shared-task data or pretrained checkpoints:
//! the corpus is generated from a fixed word list with planted toxic keywords,
//! and the "language models" are tiny byte-level BPE tokenizers with random
//! embedding tables written in the same on-disk layout as real checkpoints.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;
use tokenizers::Tokenizer;

use crate::corpus::{Post, Vocabulary};
use crate::embeddings::{EmbeddingConfig, EmbeddingMatrix, LanguageModel};
use crate::error::{Error, Result};

pub const TOXIC_WORDS: [&str; 10] = [
    "idiot", "stupid", "moron", "loser", "dumb", "pathetic", "trash", "clown", "fool", "scum",
];

pub const NEUTRAL_WORDS: [&str; 40] = [
    "the", "a", "is", "you", "we", "they", "today", "weather", "city", "council", "vote", "park", "road", "money",
    "people", "school", "book", "read", "think", "great", "plan", "budget", "tax", "water", "river", "music", "game",
    "team", "coach", "season", "house", "price", "market", "job", "work", "family", "friend", "story", "news",
    "article",
];

/// All 50 words of the synthetic corpus.
pub fn synthetic_words() -> Vec<&'static str> {
    TOXIC_WORDS.iter().chain(NEUTRAL_WORDS.iter()).copied().collect()
}

/// The vocabulary over [`synthetic_words`].
pub fn synthetic_vocabulary() -> Vocabulary {
    Vocabulary::from_words(synthetic_words())
}

/// `n` posts of 4 to 12 words with toxic keywords planted at random.
///
/// Roughly a quarter of the posts are clean. Words get random capitalization
/// and occasional trailing punctuation; gold offsets cover exactly the
/// letters of each planted keyword.
pub fn synthetic_posts(n: usize, seed: u64) -> Vec<Post> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let clean_post = rng.random_bool(0.25);
            let words = rng.random_range(4..=12);
            let mut text = String::new();
            let mut gold = BTreeSet::new();
            let mut planted = false;
            for w in 0..words {
                let must_plant = !clean_post && !planted && w == words - 1;
                let toxic = !clean_post && (must_plant || rng.random_bool(0.2));
                let word = if toxic {
                    planted = true;
                    TOXIC_WORDS[rng.random_range(0..TOXIC_WORDS.len())]
                } else {
                    NEUTRAL_WORDS[rng.random_range(0..NEUTRAL_WORDS.len())]
                };
                if !text.is_empty() {
                    text.push(' ');
                }
                let start = text.chars().count();
                if rng.random_bool(0.2) {
                    text.push_str(&word.to_uppercase());
                } else {
                    text.push_str(word);
                }
                if toxic {
                    gold.extend(start..start + word.len());
                }
                if rng.random_bool(0.15) {
                    text.push(['!', '.', '?', ','][rng.random_range(0..4)]);
                }
            }
            Post::new(i.to_string(), text, gold).expect("offsets are in range by construction")
        })
        .collect()
}

/// A seeded standard-normal table.
pub fn random_table(rows: usize, cols: usize, seed: u64) -> Array2<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(&mut rng))
}

/// A random `vocab.len() × dim` embedding matrix (pad row zero).
pub fn toy_embedding(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingMatrix {
    EmbeddingMatrix::from_table(EmbeddingConfig::Ensemble, vocab, random_table(vocab.len(), dim, seed))
        .expect("row count matches by construction")
}

/// Writes a GloVe-format text file with random vectors for `words`.
pub fn write_toy_glove(path: &Path, words: &[&str], dim: usize, seed: u64) -> Result<()> {
    let table = random_table(words.len(), dim, seed);
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for (w, row) in words.iter().zip(table.rows()) {
        let values: Vec<String> = row.iter().map(|x| format!("{x:.5}")).collect();
        writeln!(out, "{w} {}", values.join(" ")).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// A byte-level BPE tokenizer over `alphabet` with the given merges, in the
/// same configuration GPT-2 and RoBERTa ship (no prefix space). Ids are
/// assigned alphabet first, then merge results, then `unk`.
pub fn toy_lm_tokenizer(alphabet: &[&str], merges: &[(&str, &str)], unk: &str) -> Tokenizer {
    toy_tokenizer_json(alphabet, merges, unk)
        .to_string()
        .parse()
        .expect("toy tokenizer definition is valid")
}

fn toy_tokenizer_json(alphabet: &[&str], merges: &[(&str, &str)], unk: &str) -> serde_json::Value {
    let mut vocab = serde_json::Map::new();
    let mut next = 0u32;
    let mut add = |tok: String, vocab: &mut serde_json::Map<String, serde_json::Value>| {
        if !vocab.contains_key(&tok) {
            vocab.insert(tok, json!(next));
            next += 1;
        }
    };
    for a in alphabet {
        add(a.to_string(), &mut vocab);
    }
    for (l, r) in merges {
        add(format!("{l}{r}"), &mut vocab);
    }
    let unk_id = vocab.len();
    vocab.insert(unk.to_string(), json!(unk_id));
    let merges: Vec<String> = merges.iter().map(|(l, r)| format!("{l} {r}")).collect();
    let byte_level = json!({"type": "ByteLevel", "add_prefix_space": false, "trim_offsets": true, "use_regex": true});
    json!({
        "version": "1.0",
        "truncation": null,
        "padding": null,
        "added_tokens": [{
            "id": unk_id, "content": unk, "single_word": false, "lstrip": false,
            "rstrip": false, "normalized": false, "special": true
        }],
        "normalizer": null,
        "pre_tokenizer": byte_level,
        "post_processor": null,
        "decoder": byte_level,
        "model": {
            "type": "BPE", "dropout": null, "unk_token": null, "continuing_subword_prefix": null,
            "end_of_word_suffix": null, "fuse_unk": false, "byte_fallback": false, "ignore_merges": false,
            "vocab": vocab, "merges": merges
        }
    })
}

const TOY_MERGES: [(&str, &str); 12] = [
    ("t", "h"),
    ("th", "e"),
    ("i", "n"),
    ("e", "r"),
    ("a", "n"),
    ("r", "e"),
    ("o", "n"),
    ("o", "u"),
    ("i", "d"),
    ("s", "t"),
    ("o", "r"),
    ("e", "s"),
];

/// Writes `tokenizer.json` and `model.safetensors` for a toy checkpoint whose
/// embedding table is `vocab_size × dim` seeded noise, stored under the
/// tensor name the real `model` checkpoint uses.
pub fn write_toy_checkpoint(dir: &Path, model: LanguageModel, dim: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let alphabet: Vec<String> = ('a'..='z').map(String::from).collect();
    let alphabet: Vec<&str> = alphabet.iter().map(String::as_str).collect();
    let unk = match model {
        LanguageModel::Gpt2 => "<|endoftext|>",
        LanguageModel::Roberta => "<unk>",
    };
    let tok = toy_tokenizer_json(&alphabet, &TOY_MERGES, unk);
    let tok_path = dir.join("tokenizer.json");
    std::fs::write(&tok_path, serde_json::to_vec_pretty(&tok)?).map_err(|e| Error::io(&tok_path, e))?;

    let rows = tok["model"]["vocab"].as_object().map_or(0, |v| v.len());
    let table = random_table(rows, dim, seed);
    let bytes: Vec<u8> = table.iter().flat_map(|x| x.to_le_bytes()).collect();
    let name = match model {
        LanguageModel::Gpt2 => "wte.weight",
        LanguageModel::Roberta => "roberta.embeddings.word_embeddings.weight",
    };
    let view = safetensors::tensor::TensorView::new(safetensors::Dtype::F32, vec![rows, dim], &bytes)
        .map_err(|e| Error::Config(e.to_string()))?;
    let out = safetensors::serialize([(name, view)], None).map_err(|e| Error::Config(e.to_string()))?;
    let weights = dir.join("model.safetensors");
    std::fs::write(&weights, out).map_err(|e| Error::io(&weights, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize_post;

    #[test]
    fn corpus_is_deterministic_and_labeled() {
        let a = synthetic_posts(32, 7);
        assert_eq!(a, synthetic_posts(32, 7));
        assert!(a.iter().any(|p| p.gold_offsets.is_empty()));
        assert!(a.iter().any(|p| !p.gold_offsets.is_empty()));
        let vocab = synthetic_vocabulary();
        assert_eq!(vocab.num_words(), 50);
        for p in &a {
            for t in tokenize_post(p) {
                assert!(vocab.get(&t.clean).is_some(), "{}", t.clean);
                assert_eq!(t.toxic, TOXIC_WORDS.contains(&t.clean.as_str()));
            }
        }
    }
}
