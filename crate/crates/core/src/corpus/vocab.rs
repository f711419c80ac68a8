use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TokenSpan;
use crate::error::{Error, Result};

pub const PAD_INDEX: u32 = 0;
pub const UNK_INDEX: u32 = 1;
pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
/// Number of rows at the top of the vocabulary that are not words.
pub const RESERVED: usize = 2;

/// Per-position target class of the tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum TokenClass {
    Pad = 0,
    NonToxic = 1,
    Toxic = 2,
}

impl TokenClass {
    pub const COUNT: usize = 3;

    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(TokenClass::Pad),
            1 => Some(TokenClass::NonToxic),
            2 => Some(TokenClass::Toxic),
            _ => None,
        }
    }

    pub fn of_token(token: &TokenSpan) -> Self {
        if token.toxic {
            TokenClass::Toxic
        } else {
            TokenClass::NonToxic
        }
    }
}

/// Word to row index map. Rows 0 and 1 are the padding and unknown-word
/// entries; words follow in lexicographic order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = words.into_iter().map(Into::into).collect();
        let all: Vec<String> = [PAD_TOKEN.to_string(), UNK_TOKEN.to_string()]
            .into_iter()
            .chain(sorted.into_iter().filter(|w| w != PAD_TOKEN && w != UNK_TOKEN))
            .collect();
        let index = all.iter().enumerate().map(|(i, w)| (w.clone(), i as u32)).collect();
        Vocabulary { words: all, index }
    }

    /// Total rows, reserved entries included.
    pub fn len(&self) -> usize {
        self.words.len()
    }

    /// Number of real words (excludes the reserved rows).
    pub fn num_words(&self) -> usize {
        self.words.len() - RESERVED
    }

    pub fn is_empty(&self) -> bool {
        self.num_words() == 0
    }

    pub fn get(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn index_of(&self, word: &str) -> u32 {
        self.get(word).unwrap_or(UNK_INDEX)
    }

    pub fn word(&self, index: u32) -> Option<&str> {
        self.words.get(index as usize).map(String::as_str)
    }

    /// All rows in index order, reserved entries first.
    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Non-reserved words in index order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, &str)> {
        self.words
            .iter()
            .enumerate()
            .skip(RESERVED)
            .map(|(i, w)| (i as u32, w.as_str()))
    }

    /// SHA-256 over the newline-joined rows; identifies the row order that
    /// embedding matrices and checkpoints were built against.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for w in &self.words {
            h.update(w.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    /// One row per line, index order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        for w in &self.words {
            writeln!(out, "{w}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut words = Vec::new();
        for line in BufReader::new(file).lines() {
            words.push(line.map_err(|e| Error::io(path, e))?);
        }
        if words.len() < RESERVED || words[0] != PAD_TOKEN || words[1] != UNK_TOKEN {
            return Err(Error::Format {
                path: path.into(),
                line: 1,
                message: format!("vocabulary must start with {PAD_TOKEN} and {UNK_TOKEN}"),
            });
        }
        let vocab = Vocabulary::from_words(words[RESERVED..].iter().cloned());
        if vocab.words != words {
            return Err(Error::Format {
                path: path.into(),
                line: RESERVED + 1,
                message: "vocabulary rows are not unique and sorted".into(),
            });
        }
        Ok(vocab)
    }
}

/// Builds the vocabulary from tokenized, normalized and filtered training posts.
pub fn build_vocabulary<'a, I>(posts: I) -> Vocabulary
where
    I: IntoIterator<Item = &'a [TokenSpan]>,
{
    Vocabulary::from_words(
        posts
            .into_iter()
            .flat_map(|tokens| tokens.iter().filter(|t| !t.is_removable()).map(|t| t.clean.clone())),
    )
}

/// A post mapped to fixed-length index and class vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedPost {
    pub indices: Vec<u32>,
    pub labels: Vec<u8>,
    /// Number of real (non-pad) positions.
    pub length: usize,
    /// True when tokens past `max_len` were cut.
    pub truncated: bool,
}

impl EncodedPost {
    pub fn max_len(&self) -> usize {
        self.indices.len()
    }

    /// Key mask for attention: true at real positions.
    pub fn mask(&self) -> Vec<bool> {
        (0..self.indices.len()).map(|i| i < self.length).collect()
    }
}

/// Maps tokens to row indices, right-padding (or truncating) to `max_len`.
///
/// Panics if `max_len == 0`.
pub fn encode(tokens: &[TokenSpan], vocab: &Vocabulary, max_len: usize) -> EncodedPost {
    assert!(max_len >= 1, "max_len must be at least 1");
    let length = tokens.len().min(max_len);
    let mut indices = vec![PAD_INDEX; max_len];
    let mut labels = vec![TokenClass::Pad as u8; max_len];
    for (i, t) in tokens.iter().take(max_len).enumerate() {
        indices[i] = vocab.index_of(&t.clean);
        labels[i] = TokenClass::of_token(t) as u8;
    }
    EncodedPost {
        indices,
        labels,
        length,
        truncated: tokens.len() > max_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{tokenize_post, Post};

    fn toks(text: &str) -> Vec<TokenSpan> {
        tokenize_post(&Post::unlabeled("x", text))
    }

    #[test]
    fn two_posts_two_words() {
        let a = toks("a b");
        let b = toks("b a");
        let v = build_vocabulary([a.as_slice(), b.as_slice()]);
        assert_eq!(v.num_words(), 2);
        assert_eq!(v.len(), 4);
        assert_eq!(v.get("a"), Some(2));
        assert_eq!(v.get("b"), Some(3));
    }

    #[test]
    fn empty_corpus_has_reserved_rows_only() {
        let v = build_vocabulary(std::iter::empty::<&[TokenSpan]>());
        assert_eq!(v.len(), RESERVED);
        assert!(v.is_empty());
        assert_eq!(v.word(PAD_INDEX), Some(PAD_TOKEN));
        assert_eq!(v.word(UNK_INDEX), Some(UNK_TOKEN));
    }

    #[test]
    fn order_is_lexicographic_and_deterministic() {
        let t = toks("zeta Alpha mid alpha");
        let v1 = build_vocabulary([t.as_slice()]);
        let v2 = build_vocabulary([t.as_slice()]);
        let words: Vec<_> = v1.entries().map(|(_, w)| w).collect();
        assert_eq!(words, ["alpha", "mid", "zeta"]);
        assert_eq!(v1.hash(), v2.hash());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let t = toks("one two three");
        let v = build_vocabulary([t.as_slice()]);
        v.save(&path).unwrap();
        assert_eq!(Vocabulary::load(&path).unwrap(), v);
        std::fs::write(&path, "one\ntwo\n").unwrap();
        assert!(Vocabulary::load(&path).is_err());
    }

    #[test]
    fn encode_pads_to_max_len() {
        let t = toks("you stupid fool");
        let v = build_vocabulary([t.as_slice()]);
        let e = encode(&t, &v, 215);
        assert_eq!(e.indices.len(), 215);
        assert_eq!(e.length, 3);
        assert_eq!(e.indices.iter().skip(3).filter(|&&i| i == PAD_INDEX).count(), 212);
        assert!(e.labels[3..].iter().all(|&l| l == TokenClass::Pad as u8));
        assert!(!e.truncated);
    }

    #[test]
    fn encode_empty() {
        let v = Vocabulary::from_words(["a"]);
        let e = encode(&[], &v, 8);
        assert_eq!(e.length, 0);
        assert!(e.indices.iter().all(|&i| i == PAD_INDEX));
        assert!(e.mask().iter().all(|m| !m));
    }

    #[test]
    fn encode_truncates() {
        let text = vec!["w"; 300].join(" ");
        let t = toks(&text);
        assert_eq!(t.len(), 300);
        let v = build_vocabulary([t.as_slice()]);
        let e = encode(&t, &v, 215);
        assert_eq!(e.length, 215);
        assert_eq!(e.indices.len(), 215);
        assert!(e.truncated);
        assert!(e.indices.iter().all(|&i| i == v.index_of("w")));
    }

    #[test]
    fn unknown_words_map_to_unk() {
        let v = Vocabulary::from_words(["known"]);
        let t = toks("known unknown");
        let e = encode(&t, &v, 4);
        assert_eq!(&e.indices[..2], &[2, UNK_INDEX]);
        assert_eq!(&e.labels[..3], &[1, 1, 0]);
    }
}
