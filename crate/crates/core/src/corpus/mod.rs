//! Posts, tokens and vocabulary.
//!
//! The flow for a split is `parse_dataset` → [`tokenize_post`] per post →
//! [`build_vocabulary`] (training split only) → [`encode`].

mod dataset;
mod tokenize;
mod vocab;

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{format_span_literal, parse_dataset, parse_dataset_reader, parse_span_literal, DatasetFormat};
pub use tokenize::{label_tokens, normalize, preprocess, tokenize, tokenize_post, TokenSpan};
pub use vocab::{
    build_vocabulary, encode, EncodedPost, TokenClass, Vocabulary, PAD_INDEX, PAD_TOKEN, RESERVED, UNK_INDEX, UNK_TOKEN,
};

/// A post with its gold toxic character offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub text: String,
    pub gold_offsets: BTreeSet<usize>,
    /// False for posts read from a text-only file.
    pub labeled: bool,
}

impl Post {
    /// Fails if any offset lies outside the text.
    pub fn new(id: impl Into<String>, text: impl Into<String>, gold_offsets: BTreeSet<usize>) -> Result<Self> {
        let post = Post {
            id: id.into(),
            text: text.into(),
            gold_offsets,
            labeled: true,
        };
        let len = post.char_len();
        if let Some(&bad) = post.gold_offsets.range(len..).next() {
            return Err(Error::Validation {
                post_id: post.id,
                message: format!("offset {bad} is outside the text (length {len})"),
            });
        }
        Ok(post)
    }

    pub fn unlabeled(id: impl Into<String>, text: impl Into<String>) -> Self {
        Post {
            id: id.into(),
            text: text.into(),
            gold_offsets: BTreeSet::new(),
            labeled: false,
        }
    }

    /// Text length in characters, the unit of every offset.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// A post carried through tokenization and encoding.
#[derive(Debug, Clone)]
pub struct PreparedPost {
    pub post: Post,
    /// Filtered, labeled tokens; position `i` of `encoded` is `tokens[i]`.
    pub tokens: Vec<TokenSpan>,
    pub encoded: EncodedPost,
}

/// Tokenizes every post in parallel. Output order follows input order.
pub fn tokenize_posts(posts: &[Post]) -> Vec<Vec<TokenSpan>> {
    posts.par_iter().map(tokenize_post).collect()
}

/// Tokenizes and encodes a split against an existing vocabulary.
pub fn prepare_posts(posts: Vec<Post>, vocab: &Vocabulary, max_len: usize) -> Vec<PreparedPost> {
    let prepared: Vec<PreparedPost> = posts
        .into_par_iter()
        .map(|post| {
            let tokens = tokenize_post(&post);
            let encoded = encode(&tokens, vocab, max_len);
            PreparedPost { post, tokens, encoded }
        })
        .collect();
    let truncated = prepared.iter().filter(|p| p.encoded.truncated).count();
    if truncated > 0 {
        log::warn!("{truncated} post(s) exceed {max_len} tokens and were truncated");
    }
    prepared
}

/// Summary numbers printed by the `prepare` command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub posts: usize,
    pub unlabeled_posts: usize,
    pub empty_gold_posts: usize,
    pub tokens: usize,
    pub toxic_tokens: usize,
    pub removed_tokens: usize,
    pub posts_over_max_len: usize,
    pub distinct_words: usize,
}

impl CorpusStats {
    pub fn collect(posts: &[Post], max_len: usize) -> Self {
        let per_post: Vec<(usize, usize, usize, BTreeSet<String>)> = posts
            .par_iter()
            .map(|p| {
                let raw: Vec<_> = tokenize(&p.text).into_iter().map(preprocess).collect();
                let total = raw.len();
                let kept = label_tokens(p, raw);
                let toxic = kept.iter().filter(|t| t.toxic).count();
                let words = kept.iter().map(|t| t.clean.clone()).collect();
                (kept.len(), toxic, total - kept.len(), words)
            })
            .collect();
        let mut distinct = BTreeSet::new();
        let mut stats = CorpusStats {
            posts: posts.len(),
            unlabeled_posts: posts.iter().filter(|p| !p.labeled).count(),
            empty_gold_posts: posts.iter().filter(|p| p.labeled && p.gold_offsets.is_empty()).count(),
            ..Default::default()
        };
        for (kept, toxic, removed, words) in per_post {
            stats.tokens += kept;
            stats.toxic_tokens += toxic;
            stats.removed_tokens += removed;
            if kept > max_len {
                stats.posts_over_max_len += 1;
            }
            distinct.extend(words);
        }
        stats.distinct_words = distinct.len();
        stats
    }
}

/// One line of the tokenized-corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusRecord {
    #[serde(flatten)]
    pub post: Post,
    pub tokens: Vec<TokenSpan>,
}

/// Writes one JSON record per post: the post's `id`, `text`, `gold_offsets`
/// and `labeled` fields plus `tokens`, a list of `{"raw", "clean", "start",
/// "end", "toxic"}` objects.
pub fn write_corpus(path: impl AsRef<Path>, posts: &[Post], tokens: &[Vec<TokenSpan>]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for (post, toks) in posts.iter().zip(tokens) {
        let record = CorpusRecord {
            post: post.clone(),
            tokens: toks.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<CorpusRecord>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CorpusRecord = serde_json::from_str(&line).map_err(|e| Error::Format {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(&bad) = record.post.gold_offsets.range(record.post.char_len()..).next() {
            return Err(Error::Format {
                path: path.into(),
                line: i + 1,
                message: format!("offset {bad} is outside the text of post {}", record.post.id),
            });
        }
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn post_rejects_out_of_range() {
        assert!(Post::new("a", "abc", BTreeSet::from([2])).is_ok());
        assert!(matches!(
            Post::new("a", "abc", BTreeSet::from([3])),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn corpus_file_round_trip_and_determinism() {
        let posts = vec![
            Post::new("0", "you IDIOT!!", BTreeSet::from([4, 5, 6, 7, 8])).unwrap(),
            Post::new("1", "fine 😀 day", BTreeSet::new()).unwrap(),
        ];
        let toks = tokenize_posts(&posts);
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        write_corpus(&a, &posts, &toks).unwrap();
        write_corpus(&b, &posts, &tokenize_posts(&posts)).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        let back = read_corpus(&a).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].tokens, toks[0]);
        assert_eq!(back[1].post, posts[1]);
        assert!(back[0].tokens[1].toxic);
    }

    #[test]
    fn stats_count_removed_and_toxic() {
        let posts = vec![Post::new("0", "you IDIOT !!", BTreeSet::from([4, 5])).unwrap()];
        let s = CorpusStats::collect(&posts, 1);
        assert_eq!(s.tokens, 2);
        assert_eq!(s.toxic_tokens, 1);
        assert_eq!(s.removed_tokens, 1);
        assert_eq!(s.posts_over_max_len, 1);
        assert_eq!(s.distinct_words, 2);
    }
}
