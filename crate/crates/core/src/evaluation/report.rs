use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::metric::{span_f1, SpanPrediction};
use crate::corpus::{format_span_literal, parse_span_literal, Post};
use crate::error::{Error, Result};

/// Distribution of per-post F1 values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Summary {
    pub min: f64,
    pub median: f64,
    pub max: f64,
    /// Posts scoring exactly 1.
    pub perfect: usize,
    /// Posts scoring exactly 0.
    pub zero: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    /// In gold order.
    pub per_post_f1: IndexMap<String, f64>,
    /// Arithmetic mean of `per_post_f1`; 0 when there are no posts.
    pub mean_f1: f64,
    pub num_posts: usize,
    pub num_empty_gold: usize,
    pub summary: Option<F1Summary>,
}

/// Scores predictions against gold posts. The two must cover exactly the
/// same post ids.
pub fn evaluate(predictions: &[SpanPrediction], gold: &[Post]) -> Result<ScoreReport> {
    let mut by_id: BTreeMap<&str, &SpanPrediction> = BTreeMap::new();
    let mut extra = Vec::new();
    for p in predictions {
        if by_id.insert(&p.post_id, p).is_some() {
            extra.push(p.post_id.clone());
        }
    }
    let gold_ids: BTreeSet<&str> = gold.iter().map(|p| p.id.as_str()).collect();
    extra.extend(
        by_id
            .keys()
            .filter(|id| !gold_ids.contains(*id))
            .map(|id| id.to_string()),
    );
    let missing: Vec<String> = gold
        .iter()
        .filter(|p| !by_id.contains_key(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Alignment { missing, extra });
    }

    let per_post_f1: IndexMap<String, f64> = gold
        .iter()
        .map(|g| (g.id.clone(), span_f1(&by_id[g.id.as_str()].offsets, &g.gold_offsets)))
        .collect();
    let num_posts = per_post_f1.len();
    let mean_f1 = if num_posts == 0 {
        0.0
    } else {
        per_post_f1.values().sum::<f64>() / num_posts as f64
    };
    Ok(ScoreReport {
        summary: summarize(per_post_f1.values().copied().collect()),
        per_post_f1,
        mean_f1,
        num_posts,
        num_empty_gold: gold.iter().filter(|p| p.gold_offsets.is_empty()).count(),
    })
}

fn summarize(mut values: Vec<f64>) -> Option<F1Summary> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let median = if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    };
    Some(F1Summary {
        min: values[0],
        median,
        max: values[n - 1],
        perfect: values.iter().filter(|&&v| v == 1.0).count(),
        zero: values.iter().filter(|&&v| v == 0.0).count(),
    })
}

/// One bracketed, sorted offset list per line, in the given order.
pub fn write_predictions(path: impl AsRef<Path>, predictions: &[SpanPrediction]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for p in predictions {
        writeln!(out, "{}", format_span_literal(&p.offsets)).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a prediction file, pairing line `i` with `ids[i]`.
pub fn read_predictions(path: impl AsRef<Path>, ids: &[String]) -> Result<Vec<SpanPrediction>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let offsets = parse_span_literal(&line).map_err(|message| Error::Format {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        })?;
        out.push(offsets);
    }
    if out.len() != ids.len() {
        let (missing, extra) = if out.len() < ids.len() {
            (ids[out.len()..].to_vec(), Vec::new())
        } else {
            (
                Vec::new(),
                (ids.len()..out.len()).map(|i| format!("line {}", i + 1)).collect(),
            )
        };
        return Err(Error::Alignment { missing, extra });
    }
    Ok(ids
        .iter()
        .zip(out)
        .map(|(id, offsets)| SpanPrediction {
            post_id: id.clone(),
            offsets,
        })
        .collect())
}
