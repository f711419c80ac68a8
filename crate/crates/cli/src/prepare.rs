use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use tsd_core::corpus::{build_vocabulary, tokenize_posts, write_corpus, CorpusStats, Post};

use crate::data::{split_path, vocab_path};
use crate::manifest::RunManifest;

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Training CSV (`spans,text` or `text`).
    #[arg(long)]
    pub train: PathBuf,
    /// Dev (trial) CSV.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Test CSV, with or without spans.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Sequence length used to report truncation.
    #[arg(long, default_value_t = 215)]
    pub max_len: usize,
}

pub fn run(args: &PrepareArgs) -> Result<()> {
    let mut manifest = RunManifest::start("prepare");
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut splits: Vec<(&str, Vec<Post>)> = Vec::new();
    for (name, path) in [
        ("train", Some(&args.train)),
        ("dev", args.dev.as_ref()),
        ("test", args.test.as_ref()),
    ] {
        let Some(path) = path else { continue };
        let posts = tsd_core::corpus::parse_dataset(path, None)
            .with_context(|| format!("reading {name} split {}", path.display()))?;
        if posts.is_empty() {
            log::warn!("{name} split {} contains no posts", path.display());
        }
        manifest.input(name, path);
        splits.push((name, posts));
    }

    let mut stats = BTreeMap::new();
    let mut vocab = None;
    for (name, posts) in &splits {
        let tokens = tokenize_posts(posts);
        if *name == "train" {
            vocab = Some(build_vocabulary(tokens.iter().map(Vec::as_slice)));
        }
        let out = split_path(&args.out, name);
        write_corpus(&out, posts, &tokens)?;
        manifest.output(name, &out);
        let s = CorpusStats::collect(posts, args.max_len);
        println!(
            "{name}: {} posts ({} with empty gold), {} tokens ({} toxic), {} distinct words, {} over {} tokens",
            s.posts, s.empty_gold_posts, s.tokens, s.toxic_tokens, s.distinct_words, s.posts_over_max_len, args.max_len
        );
        stats.insert(name.to_string(), s);
    }
    let vocab = vocab.expect("the training split is always read");
    let vpath = vocab_path(&args.out);
    vocab.save(&vpath)?;
    println!(
        "vocabulary: {} words (+2 reserved rows), hash {}",
        vocab.num_words(),
        &vocab.hash()[..12]
    );

    let stats_path = args.out.join("stats.json");
    std::fs::write(&stats_path, serde_json::to_string_pretty(&stats)? + "\n")
        .with_context(|| format!("writing {}", stats_path.display()))?;
    manifest
        .output("vocab", &vpath)
        .output("stats", &stats_path)
        .result("vocab_words", vocab.num_words())
        .result("vocab_hash", vocab.hash())
        .result("max_len", args.max_len)
        .result(
            "posts",
            stats
                .iter()
                .map(|(k, s)| (k.clone(), s.posts))
                .collect::<BTreeMap<_, _>>(),
        );
    manifest.finish(&args.out.join("manifest.json"))
}
