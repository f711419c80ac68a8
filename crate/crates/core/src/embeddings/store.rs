//! On-disk layout for embedding tables.
//!
//! ```text
//! magic      8 bytes   "TSDEMB01"
//! header_len u64 LE
//! header     header_len bytes of JSON (label, vocab hash, rows, cols, block widths, OOV mask)
//! body       rows × cols f32 LE, row-major
//! ```

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{EmbeddingConfig, EmbeddingMatrix};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"TSDEMB01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TableHeader {
    pub label: String,
    pub vocab_hash: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub glove_dim: usize,
    #[serde(default)]
    pub lm_dim: usize,
    /// One '0'/'1' per row; empty when not applicable.
    #[serde(default)]
    pub oov_mask: String,
}

impl TableHeader {
    pub fn new(label: String, vocab_hash: &str, table: &Array2<f32>) -> Self {
        TableHeader {
            label,
            vocab_hash: vocab_hash.to_string(),
            rows: table.nrows(),
            cols: table.ncols(),
            glove_dim: 0,
            lm_dim: 0,
            oov_mask: String::new(),
        }
    }
}

pub(crate) fn write_table(path: &Path, header: &TableHeader, table: &Array2<f32>) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    let json = serde_json::to_vec(header)?;
    out.write_all(MAGIC).map_err(io)?;
    out.write_all(&(json.len() as u64).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for x in table.iter() {
        out.write_all(&x.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub(crate) fn read_table(path: &Path) -> Result<(TableHeader, Array2<f32>)> {
    let io = |e| Error::io(path, e);
    let mut input = BufReader::new(std::fs::File::open(path).map_err(io)?);
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(io)?;
    if &magic != MAGIC {
        return Err(Error::Integrity(format!(
            "{} is not an embedding table",
            path.display()
        )));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut json = vec![0u8; len];
    input.read_exact(&mut json).map_err(io)?;
    let header: TableHeader = serde_json::from_slice(&json)?;
    let mut body = Vec::new();
    input.read_to_end(&mut body).map_err(io)?;
    let expected = header.rows * header.cols * 4;
    if body.len() != expected {
        return Err(Error::Integrity(format!(
            "{}: body has {} bytes, header promises {expected}",
            path.display(),
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let table =
        Array2::from_shape_vec((header.rows, header.cols), values).map_err(|e| Error::Integrity(e.to_string()))?;
    Ok((header, table))
}

pub fn save_matrix(path: impl AsRef<Path>, matrix: &EmbeddingMatrix) -> Result<()> {
    let mut header = TableHeader::new(matrix.config.name().to_string(), &matrix.vocab_hash, &matrix.matrix);
    header.glove_dim = matrix.glove_dim;
    header.lm_dim = matrix.lm_dim;
    header.oov_mask = matrix.oov_mask.iter().map(|&m| if m { '1' } else { '0' }).collect();
    write_table(path.as_ref(), &header, &matrix.matrix)
}

/// Reads a matrix file. With `vocab`, also checks that the file was built
/// for exactly that vocabulary.
pub fn load_matrix(path: impl AsRef<Path>, vocab: Option<&Vocabulary>) -> Result<EmbeddingMatrix> {
    let path = path.as_ref();
    let (header, matrix) = read_table(path)?;
    let config: EmbeddingConfig = header.label.parse()?;
    if let Some(v) = vocab {
        let hash = v.hash();
        if hash != header.vocab_hash {
            return Err(Error::Integrity(format!(
                "{} was built for vocabulary {}…, not {}…",
                path.display(),
                &header.vocab_hash[..12.min(header.vocab_hash.len())],
                &hash[..12]
            )));
        }
        if v.len() != header.rows {
            return Err(Error::Integrity(format!(
                "{} has {} rows, vocabulary has {}",
                path.display(),
                header.rows,
                v.len()
            )));
        }
    }
    if header.glove_dim + header.lm_dim != header.cols || header.oov_mask.len() != header.rows {
        return Err(Error::Integrity(format!("{}: inconsistent header", path.display())));
    }
    Ok(EmbeddingMatrix {
        config,
        vocab_hash: header.vocab_hash,
        glove_dim: header.glove_dim,
        lm_dim: header.lm_dim,
        oov_mask: header.oov_mask.chars().map(|c| c == '1').collect(),
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::{fuse, GloveVectors, WordVectors};
    use crate::fixtures::random_table;

    fn toy(vocab: &Vocabulary) -> EmbeddingMatrix {
        let n = vocab.len();
        let mut glove = random_table(n, 300, 1);
        if n > 3 {
            glove.row_mut(3).fill(0.0);
        }
        let found = (0..n).map(|i| i >= 2 && i != 3).collect();
        let g = GloveVectors {
            vectors: WordVectors {
                vectors: glove,
                vocab_hash: vocab.hash(),
            },
            found,
        };
        let lm = |seed| WordVectors {
            vectors: random_table(n, 768, seed),
            vocab_hash: vocab.hash(),
        };
        fuse(EmbeddingConfig::Ensemble, Some(&g), Some(&lm(2)), Some(&lm(3))).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let vocab = Vocabulary::from_words(["one", "two", "three"]);
        let m = toy(&vocab);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emb");
        save_matrix(&path, &m).unwrap();
        let back = load_matrix(&path, Some(&vocab)).unwrap();
        assert_eq!(back.rows(), 3 + crate::corpus::RESERVED);
        assert_eq!(back.width(), 1068);
        assert_eq!(back, m);
        let bits = |m: &EmbeddingMatrix| m.matrix.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn other_vocabulary_is_integrity_error() {
        let vocab = Vocabulary::from_words(["one", "two", "three"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emb");
        save_matrix(&path, &toy(&vocab)).unwrap();
        let other = Vocabulary::from_words(["one", "two", "four"]);
        assert!(matches!(load_matrix(&path, Some(&other)), Err(Error::Integrity(_))));
    }

    #[test]
    fn truncated_file_is_integrity_error() {
        let vocab = Vocabulary::from_words(["one"]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.emb");
        save_matrix(&path, &toy(&vocab)).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_matrix(&path, None), Err(Error::Integrity(_))));
        std::fs::write(&path, b"garbage!garbage!").unwrap();
        assert!(matches!(load_matrix(&path, None), Err(Error::Integrity(_))));
    }
}
