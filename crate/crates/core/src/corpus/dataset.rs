//! Reading the shared-task CSV release.
//!
//! The labeled files carry two columns, `spans` (a bracketed integer list such
//! as `[3, 4, 5]`) and `text`. Unlabeled files carry `text` only. An optional
//! `id` column is honoured; otherwise posts are numbered by row, from 0.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Post;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DatasetFormat {
    /// `spans` + `text` columns.
    SpansAndText,
    /// `text` column only; every post is flagged unlabeled.
    TextOnly,
}

impl DatasetFormat {
    /// Picks the format from a header row.
    pub fn detect(headers: &csv::StringRecord) -> Option<Self> {
        let has = |name: &str| headers.iter().any(|h| h.trim() == name);
        match (has("spans"), has("text")) {
            (true, true) => Some(DatasetFormat::SpansAndText),
            (false, true) => Some(DatasetFormat::TextOnly),
            _ => None,
        }
    }
}

/// Parses a dataset file. `format = None` detects it from the header.
pub fn parse_dataset(path: impl AsRef<Path>, format: Option<DatasetFormat>) -> Result<Vec<Post>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_reader(file, format)
}

pub fn parse_dataset_reader<R: Read>(reader: R, format: Option<DatasetFormat>) -> Result<Vec<Post>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::RowParse {
            row: 0,
            message: format!("unreadable header: {e}"),
        })?
        .clone();
    let format = match format.or_else(|| DatasetFormat::detect(&headers)) {
        Some(f) => f,
        None => {
            return Err(Error::RowParse {
                row: 0,
                message: "header must contain a `text` column".into(),
            })
        }
    };
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let text_col = column("text").ok_or_else(|| Error::RowParse {
        row: 0,
        message: "missing `text` column".into(),
    })?;
    let spans_col = match format {
        DatasetFormat::SpansAndText => Some(column("spans").ok_or_else(|| Error::RowParse {
            row: 0,
            message: "missing `spans` column".into(),
        })?),
        DatasetFormat::TextOnly => None,
    };
    let id_col = column("id");

    let mut posts = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| Error::RowParse {
            row,
            message: e.to_string(),
        })?;
        let field = |col: usize| {
            record.get(col).ok_or_else(|| Error::RowParse {
                row,
                message: format!("missing field {col}"),
            })
        };
        let text = field(text_col)?;
        let id = match id_col {
            Some(c) => field(c)?.to_string(),
            None => idx.to_string(),
        };
        let post = match spans_col {
            Some(c) => {
                let offsets = parse_span_literal(field(c)?).map_err(|message| Error::RowParse { row, message })?;
                Post::new(id, text, offsets)?
            }
            None => Post::unlabeled(id, text),
        };
        posts.push(post);
    }
    Ok(posts)
}

/// Parses a bracketed integer list such as `[3, 4, 5]` or `[]`.
pub fn parse_span_literal(literal: &str) -> std::result::Result<BTreeSet<usize>, String> {
    let inner = literal
        .trim()
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| format!("span literal `{literal}` is not bracketed"))?;
    if inner.trim().is_empty() {
        return Ok(BTreeSet::new());
    }
    inner
        .split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<usize>()
                .map_err(|_| format!("span literal `{literal}` has non-integer item `{item}`"))
        })
        .collect()
}

/// Formats offsets the way the release and the prediction files do.
pub fn format_span_literal<'a>(offsets: impl IntoIterator<Item = &'a usize>) -> String {
    let items: Vec<String> = offsets.into_iter().map(usize::to_string).collect();
    format!("[{}]", items.join(", "))
}
