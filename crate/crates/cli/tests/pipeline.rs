use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tsd_core::corpus::{format_span_literal, Post};
use tsd_core::embeddings::LanguageModel;
use tsd_core::fixtures::{synthetic_posts, synthetic_words, write_toy_checkpoint, write_toy_glove};

struct Workspace {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn tsd(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_tsd"))
            .args(args)
            .current_dir(&self.root)
            .env("TSD_HUB_CACHE", self.path("hub"))
            .env("TSD_OFFLINE", "1")
            .env("RUST_LOG", "warn")
            .output()
            .expect("binary runs")
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.tsd(args);
        assert!(
            out.status.success(),
            "tsd {args:?} failed\nstdout:\n{}\nstderr:\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }
}

fn csv_field(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn write_csv(path: &Path, posts: &[Post]) {
    let mut text = String::from("spans,text\n");
    for p in posts {
        text.push_str(&format!(
            "{},{}\n",
            csv_field(&format_span_literal(&p.gold_offsets)),
            csv_field(&p.text)
        ));
    }
    std::fs::write(path, text).unwrap();
}

/// Synthetic splits, a 300-d GloVe file missing some words, and two 768-d
/// toy checkpoints.
fn workspace() -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let posts = synthetic_posts(48, 21);
    write_csv(&root.join("train.csv"), &posts[..32]);
    write_csv(&root.join("trial.csv"), &posts[32..40]);
    write_csv(&root.join("test.csv"), &posts[40..]);
    let words = synthetic_words();
    write_toy_glove(&root.join("glove.txt"), &words[..40], 300, 1).unwrap();
    write_toy_checkpoint(&root.join("gpt2"), LanguageModel::Gpt2, 768, 2).unwrap();
    write_toy_checkpoint(&root.join("roberta"), LanguageModel::Roberta, 768, 3).unwrap();
    Workspace { _tmp: tmp, root }
}

const SMALL: [&str; 8] = [
    "--epochs",
    "2",
    "--hidden-size",
    "8",
    "--max-len",
    "16",
    "--batch-size",
    "4",
];

fn prepare(ws: &Workspace) -> String {
    ws.ok(&[
        "prepare",
        "--train",
        "train.csv",
        "--dev",
        "trial.csv",
        "--test",
        "test.csv",
        "--out",
        "data",
    ])
}

fn embed(ws: &Workspace, config: &str) -> String {
    ws.ok(&[
        "embed",
        "--data",
        "data",
        "--config",
        config,
        "--glove",
        "glove.txt",
        "--gpt2",
        "gpt2",
        "--roberta",
        "roberta",
    ])
}

fn manifest_without_times(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let obj = v.as_object_mut().unwrap();
    obj.remove("started_unix_ms");
    obj.remove("finished_unix_ms");
    v
}

#[test]
fn prepare_reports_counts_and_is_idempotent() {
    let ws = workspace();
    let out = prepare(&ws);
    assert!(out.contains("train: 32 posts"), "{out}");
    assert!(out.contains("dev: 8 posts"), "{out}");
    let first = std::fs::read(ws.path("data/train.jsonl")).unwrap();
    let m1 = manifest_without_times(&ws.path("data/manifest.json"));
    prepare(&ws);
    assert_eq!(first, std::fs::read(ws.path("data/train.jsonl")).unwrap());
    assert_eq!(m1, manifest_without_times(&ws.path("data/manifest.json")));
}

#[test]
fn empty_csv_is_a_warning_not_an_error() {
    let ws = workspace();
    std::fs::write(ws.path("empty.csv"), "spans,text\n").unwrap();
    let out = ws.tsd(&["prepare", "--train", "empty.csv", "--out", "empty"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("train: 0 posts"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("contains no posts"));
}

#[test]
fn embed_reports_widths() {
    let ws = workspace();
    prepare(&ws);
    assert!(embed(&ws, "Ensemble").contains("width 1068"));
    assert!(embed(&ws, "RG").contains("width 768"));
    assert!(embed(&ws, "GoR").contains("width 1068"));
    assert!(embed(&ws, "GloVe").contains("width 300"));
    assert!(ws.path("data/embeddings/Ensemble.emb").is_file());
    assert!(ws.path("data/embeddings/Ensemble.manifest.json").is_file());
    // the LM vectors were cached once per model
    let cached = std::fs::read_dir(ws.path("data/lm-cache")).unwrap().count();
    assert_eq!(cached, 2);
}

#[test]
fn glove_on_nonce_vocabulary_warns_full_oov() {
    let ws = workspace();
    let nonce: Vec<Post> = (0..3)
        .map(|i| Post::new(i.to_string(), "zorblax quuxify", Default::default()).unwrap())
        .collect();
    write_csv(&ws.path("nonce.csv"), &nonce);
    ws.ok(&["prepare", "--train", "nonce.csv", "--out", "nonce"]);
    let out = ws.tsd(&["embed", "--data", "nonce", "--config", "GloVe", "--glove", "glove.txt"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("GloVe OOV: 2 of 2 words (100.0%)"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("none of the 2 vocabulary words"));
}

#[test]
fn missing_checkpoint_names_the_stage() {
    let ws = workspace();
    prepare(&ws);
    let out = ws.tsd(&[
        "embed",
        "--data",
        "data",
        "--config",
        "RoBERTa",
        "--roberta",
        "no-such-model",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("error [embed]"), "{err}");
    assert!(err.contains("offline"), "{err}");
}

#[test]
fn train_predict_evaluate() {
    let ws = workspace();
    prepare(&ws);
    embed(&ws, "Ensemble");
    let mut args = vec![
        "train",
        "--data",
        "data",
        "--embeddings",
        "data/embeddings/Ensemble.emb",
        "--run-dir",
        "run",
        "--variant",
        "BiGRU+Attention",
    ];
    args.extend(SMALL);
    let out = ws.ok(&args);
    assert!(out.contains("final dev span F1"), "{out}");
    for f in [
        "manifest.json",
        "training_log.jsonl",
        "checkpoints/final.json",
        "checkpoints/best.json",
    ] {
        assert!(ws.path("run").join(f).is_file(), "{f}");
    }
    let log = std::fs::read_to_string(ws.path("run/training_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);

    ws.ok(&["predict", "--run-dir", "run"]);
    let preds = std::fs::read_to_string(ws.path("run/predictions.txt")).unwrap();
    assert_eq!(preds.lines().count(), 8);
    assert!(preds.lines().all(|l| l.starts_with('[') && l.ends_with(']')));
    assert!(ws.path("run/predictions.manifest.json").is_file());

    let out = ws.ok(&[
        "evaluate",
        "--gold",
        "trial.csv",
        "--predictions",
        "run/predictions.txt",
    ]);
    assert!(out.contains("mean span F1"), "{out}");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["num_posts"], 8);

    // same seed and inputs: identical checkpoint
    let first = std::fs::read(ws.path("run/checkpoints/final.json")).unwrap();
    let mut again = args.clone();
    again[6] = "run2";
    ws.ok(&again);
    assert_eq!(first, std::fs::read(ws.path("run2/checkpoints/final.json")).unwrap());
    assert_eq!(
        manifest_without_times(&ws.path("run/manifest.json"))["model"],
        manifest_without_times(&ws.path("run2/manifest.json"))["model"]
    );
}

#[test]
fn settings_file_is_overridden_by_flags() {
    let ws = workspace();
    prepare(&ws);
    embed(&ws, "RG");
    std::fs::write(
        ws.path("settings.toml"),
        "[model]\nepochs = 1\nhidden_size = 4\nmax_len = 16\nbatch_size = 8\n",
    )
    .unwrap();
    ws.ok(&[
        "--settings",
        "settings.toml",
        "train",
        "--data",
        "data",
        "--embeddings",
        "data/embeddings/RG.emb",
        "--run-dir",
        "run",
        "--epochs",
        "3",
    ]);
    let log = std::fs::read_to_string(ws.path("run/training_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 3);
    let m = manifest_without_times(&ws.path("run/manifest.json"));
    assert_eq!(m["model"]["hidden_size"], 4);
    assert_eq!(m["model"]["batch_size"], 8);
    assert_eq!(m["model"]["dense_units"], 50);
}

#[test]
fn gold_derived_predictions_score_one() {
    let ws = workspace();
    let posts = synthetic_posts(48, 21);
    let lines: String = posts[32..40]
        .iter()
        .map(|p| format_span_literal(&p.gold_offsets) + "\n")
        .collect();
    std::fs::write(ws.path("gold.txt"), lines).unwrap();
    let out = ws.ok(&[
        "evaluate",
        "--gold",
        "trial.csv",
        "--predictions",
        "gold.txt",
        "--out",
        "r.json",
    ]);
    assert!(out.contains("mean span F1: 1.000"), "{out}");
}

#[test]
fn hand_built_posts_score_as_computed() {
    let ws = workspace();
    // post a: S={0,1,2}, G={1,2} → P=2/3, R=1, F1=0.8
    // post b: S={6,7},  G={4,5,6} → P=1/2, R=1/3, F1=0.4
    std::fs::write(
        ws.path("gold.csv"),
        "spans,text\n\"[1, 2]\",abcdef\n\"[4, 5, 6]\",abcdefgh\n",
    )
    .unwrap();
    std::fs::write(ws.path("p.txt"), "[0, 1, 2]\n[6, 7]\n").unwrap();
    let out = ws.ok(&["evaluate", "--gold", "gold.csv", "--predictions", "p.txt"]);
    assert!(out.contains("mean span F1: 0.600 over 2 posts"), "{out}");
    std::fs::write(ws.path("short.txt"), "[0]\n").unwrap();
    let bad = ws.tsd(&["evaluate", "--gold", "gold.csv", "--predictions", "short.txt"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("error [evaluate]"));
}

#[test]
fn ablate_only_runs_one_cell() {
    let ws = workspace();
    prepare(&ws);
    let mut args = vec![
        "ablate",
        "--data",
        "data",
        "--glove",
        "glove.txt",
        "--gpt2",
        "gpt2",
        "--roberta",
        "roberta",
        "--out",
        "grid",
        "--only",
        "BiGRU+Attention:Ensemble",
        "--base-seed",
        "100",
    ];
    args.extend(SMALL);
    ws.ok(&args);
    let cells = std::fs::read_dir(ws.path("grid/cells")).unwrap().count();
    assert_eq!(cells, 1);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("grid/ablation.json")).unwrap()).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 1);
    assert_eq!(json[0]["seed"], 127);
    let report = std::fs::read_to_string(ws.path("grid/report.md")).unwrap();
    assert!(report.contains("## Test"));
    let row = report.lines().find(|l| l.starts_with("| BiGRU+Attention |")).unwrap();
    assert_eq!(row.matches(" - ").count(), 6, "{row}");
}

#[test]
fn ablate_marks_failed_cells_and_exits_nonzero() {
    let ws = workspace();
    prepare(&ws);
    let mut args = vec![
        "ablate",
        "--data",
        "data",
        "--glove",
        "glove.txt",
        "--roberta",
        "missing-model",
        "--out",
        "grid",
        "--only",
        "BiGRU:GloVe",
        "--only",
        "BiGRU:RoBERTa",
    ];
    args.extend(SMALL);
    let out = ws.tsd(&args);
    assert_eq!(out.status.code(), Some(2));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ws.path("grid/ablation.json")).unwrap()).unwrap();
    assert!(json[0]["error"].is_null());
    assert!(json[0]["dev_f1"].is_number());
    assert!(json[1]["error"].as_str().unwrap().contains("missing-model"));
    let report = std::fs::read_to_string(ws.path("grid/report.md")).unwrap();
    assert!(report.contains("failed"));
}

#[test]
fn smoke_grid_fills_all_28_cells() {
    let ws = workspace();
    prepare(&ws);
    let args = [
        "ablate",
        "--data",
        "data",
        "--glove",
        "glove.txt",
        "--gpt2",
        "gpt2",
        "--roberta",
        "roberta",
        "--out",
        "grid",
        "--epochs",
        "1",
        "--hidden-size",
        "4",
        "--max-len",
        "16",
        "--batch-size",
        "8",
    ];
    ws.ok(&args);
    let report = std::fs::read_to_string(ws.path("grid/report.md")).unwrap();
    let rows: Vec<&str> = report.lines().filter(|l| l.starts_with("| Bi")).collect();
    assert_eq!(rows.len(), 8, "dev and test tables with four rows each");
    for row in rows {
        assert_eq!(row.matches('|').count(), 9);
        assert!(!row.contains(" - ") && !row.contains("failed"), "{row}");
    }
    // each language model's vectors were extracted once for the whole grid
    assert_eq!(std::fs::read_dir(ws.path("grid/lm-cache")).unwrap().count(), 2);
}
