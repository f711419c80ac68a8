//! Layout of a prepared-data directory:
//!
//! ```text
//! vocab.txt        one word per line, rows 0 and 1 reserved
//! train.jsonl      posts with text, gold offsets and tokens
//! dev.jsonl        optional
//! test.jsonl       optional
//! stats.json       corpus statistics per split
//! manifest.json
//! ```

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use tsd_core::corpus::{parse_dataset, read_corpus, Post, Vocabulary};

pub fn vocab_path(dir: &Path) -> PathBuf {
    dir.join("vocab.txt")
}

pub fn split_path(dir: &Path, split: &str) -> PathBuf {
    dir.join(format!("{split}.jsonl"))
}

pub fn load_vocab(dir: &Path) -> Result<Vocabulary> {
    let path = vocab_path(dir);
    Vocabulary::load(&path).with_context(|| format!("loading vocabulary {}", path.display()))
}

/// Posts of a prepared split, or `None` if the split was not prepared.
pub fn load_split(dir: &Path, split: &str) -> Result<Option<Vec<Post>>> {
    let path = split_path(dir, split);
    if !path.exists() {
        return Ok(None);
    }
    let records = read_corpus(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(records.into_iter().map(|r| r.post).collect()))
}

/// Posts from a prepared `.jsonl` file or a raw dataset CSV.
pub fn load_posts(path: &Path) -> Result<Vec<Post>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        Ok(read_corpus(path)
            .with_context(|| format!("reading {}", path.display()))?
            .into_iter()
            .map(|r| r.post)
            .collect())
    } else {
        parse_dataset(path, None).with_context(|| format!("reading dataset {}", path.display()))
    }
}

pub fn require_labeled(posts: &[Post], what: &str) -> Result<()> {
    if let Some(p) = posts.iter().find(|p| !p.labeled) {
        bail!("{what} must carry gold spans, but post {} has none", p.id);
    }
    Ok(())
}
