use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::WordVectors;
use crate::corpus::{Vocabulary, RESERVED};
use crate::error::{Error, Result};

pub const GLOVE_DIM: usize = 300;

/// GloVe vectors aligned to a vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct GloveVectors {
    /// Zero rows for reserved entries and for words missing from the file.
    pub vectors: WordVectors,
    /// Per row: whether the file had a vector for the word.
    pub found: Vec<bool>,
}

impl GloveVectors {
    /// Vocabulary words the file does not cover, in index order.
    pub fn oov<'v>(&self, vocab: &'v Vocabulary) -> Vec<&'v str> {
        vocab
            .entries()
            .filter(|(i, _)| !self.found[*i as usize])
            .map(|(_, w)| w)
            .collect()
    }

    pub fn oov_count(&self) -> usize {
        self.found.iter().skip(RESERVED).filter(|f| !**f).count()
    }
}

/// Reads a GloVe text file (`word v1 .. v_dim` per line) and keeps the rows
/// for vocabulary words. The first occurrence of a word wins.
///
/// The 840B release contains a few entries whose "word" has internal spaces;
/// lines with more than `dim + 1` fields treat the leading fields as the word.
/// Lines with fewer fields are a format error.
pub fn load_glove(path: impl AsRef<Path>, vocab: &Vocabulary, dim: usize) -> Result<GloveVectors> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    load_glove_reader(file, path, vocab, dim)
}

pub fn load_glove_reader<R: Read>(reader: R, path: &Path, vocab: &Vocabulary, dim: usize) -> Result<GloveVectors> {
    let format_err = |line: usize, message: String| Error::Format {
        path: PathBuf::from(path),
        line,
        message,
    };
    let mut vectors = Array2::<f32>::zeros((vocab.len(), dim));
    let mut found = vec![false; vocab.len()];
    let mut reader = BufReader::with_capacity(1 << 20, reader);
    let mut buf = Vec::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line = String::from_utf8_lossy(&buf);
        let trimmed = line.trim_end_matches(['\n', '\r']);
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(' ').collect();
        if fields.len() < dim + 1 {
            return Err(format_err(
                line_no,
                format!("expected a word and {dim} values, found {} fields", fields.len()),
            ));
        }
        let split = fields.len() - dim;
        let word = if split == 1 {
            fields[0].to_string()
        } else {
            fields[..split].join(" ")
        };
        let Some(idx) = vocab.get(&word) else { continue };
        let idx = idx as usize;
        if idx < RESERVED || found[idx] {
            continue;
        }
        let mut row = vectors.row_mut(idx);
        for (slot, field) in row.iter_mut().zip(&fields[split..]) {
            *slot = field
                .parse()
                .map_err(|_| format_err(line_no, format!("`{field}` is not a number")))?;
        }
        found[idx] = true;
    }
    let oov = found.iter().skip(RESERVED).filter(|f| !**f).count();
    if vocab.num_words() > 0 && oov == vocab.num_words() {
        log::warn!("none of the {} vocabulary words has a GloVe vector", vocab.num_words());
    }
    Ok(GloveVectors {
        vectors: WordVectors {
            vectors,
            vocab_hash: vocab.hash(),
        },
        found,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, vocab: &Vocabulary, dim: usize) -> Result<GloveVectors> {
        load_glove_reader(text.as_bytes(), Path::new("glove.txt"), vocab, dim)
    }

    #[test]
    fn known_word_gets_vector() {
        let v = Vocabulary::from_words(["the"]);
        let g = load("the 0.5 -1 2\nother 1 1 1\n", &v, 3).unwrap();
        assert_eq!(g.vectors.vectors.row(2).to_vec(), vec![0.5, -1.0, 2.0]);
        assert_eq!(g.oov_count(), 0);
        assert!(g.oov(&v).is_empty());
    }

    #[test]
    fn nonce_word_is_oov_and_zero() {
        let v = Vocabulary::from_words(["zzqxfiltered"]);
        let g = load("the 1 2 3\n", &v, 3).unwrap();
        assert_eq!(g.oov(&v), ["zzqxfiltered"]);
        assert!(g.vectors.vectors.row(2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn short_line_is_format_error_with_line_number() {
        let v = Vocabulary::from_words(["a"]);
        match load("a 1 2 3\nb 1 2\n", &v, 3) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_number_in_vocab_row() {
        let v = Vocabulary::from_words(["a"]);
        assert!(matches!(load("a 1 x 3\n", &v, 3), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn first_occurrence_wins_and_spaced_words_parse() {
        let v = Vocabulary::from_words(["a"]);
        let g = load(". . . 9 9 9\na 1 1 1\na 2 2 2\n", &v, 3).unwrap();
        assert_eq!(g.vectors.vectors.row(2).to_vec(), vec![1.0, 1.0, 1.0]);
    }
}
