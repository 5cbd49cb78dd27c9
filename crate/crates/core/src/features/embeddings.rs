//! Pretrained word vectors in the word2vec text format.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::text::load_with;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn from_vectors<I, S>(dim: usize, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = EmbeddingTable {
            dim,
            ..Default::default()
        };
        for (word, v) in vectors {
            let word = word.into();
            if v.len() != dim {
                return Err(Error::InvalidData(format!(
                    "vector for `{word}` has {} dimensions, expected {dim}",
                    v.len()
                )));
            }
            table.push(word, &v)?;
        }
        Ok(table)
    }

    fn push(&mut self, word: String, v: &[f64]) -> Result<()> {
        if self.rows.contains_key(&word) {
            return Err(Error::InvalidData(format!("duplicate word `{word}`")));
        }
        self.rows.insert(word, self.rows.len());
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `None` for out-of-vocabulary words.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.rows
            .get(word)
            .map(|&r| &self.data[r * self.dim..(r + 1) * self.dim])
    }

    pub fn contains(&self, word: &str) -> bool {
        self.rows.contains_key(word)
    }
}

/// Parses `word v1 ... vd` lines with an optional `V D` header line.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable> {
    let mut table = EmbeddingTable::default();
    let mut expected_words: Option<usize> = None;
    let mut first = true;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if first {
            first = false;
            if let [v, d] = fields[..] {
                if let (Ok(v), Ok(d)) = (v.parse::<usize>(), d.parse::<usize>()) {
                    if d == 0 {
                        return Err(Error::parse(line_no, "header declares 0 dimensions"));
                    }
                    expected_words = Some(v);
                    table.dim = d;
                    continue;
                }
            }
        }
        let word = fields[0];
        let values = fields[1..]
            .iter()
            .map(|s| s.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| Error::parse(line_no, format!("non-numeric vector for `{word}`")))?;
        if table.dim == 0 {
            if values.is_empty() {
                return Err(Error::parse(line_no, format!("`{word}` has no vector")));
            }
            table.dim = values.len();
        }
        if values.len() != table.dim {
            return Err(Error::parse(
                line_no,
                format!("`{word}` has {} dimensions, expected {}", values.len(), table.dim),
            ));
        }
        table
            .push(word.to_string(), &values)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
    }
    if let Some(v) = expected_words {
        if v != table.len() {
            return Err(Error::parse(
                1,
                format!("header declares {v} words, file has {}", table.len()),
            ));
        }
    }
    Ok(table)
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    load_with(path.as_ref(), parse_embeddings)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn with_and_without_header() {
        let t = parse_embeddings("2 3\ncity 1 0 0\ntown 0.5 0.5 0\n").unwrap();
        assert_eq!(t.dim(), 3);
        assert_eq!(t.get("town"), Some(&[0.5, 0.5, 0.0][..]));
        assert!(t.get("village").is_none());
        let t = parse_embeddings("city 1 0\n\ntown 0 1\n").unwrap();
        assert_eq!((t.len(), t.dim()), (2, 2));
    }

    #[test]
    fn validation() {
        assert!(parse_embeddings("city 1 0\ntown 1\n").is_err());
        assert!(parse_embeddings("3 2\ncity 1 0\n").is_err());
        assert!(parse_embeddings("city 1 x\n").is_err());
        assert!(parse_embeddings("city 1 0\ncity 0 1\n").is_err());
        assert!(parse_embeddings("city\n").is_err());
        assert!(parse_embeddings("city 1 inf\n").is_err());
    }

    #[test]
    fn cosine_values() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 2.0]), 0.0);
        assert!((cosine(&[1.0, 1.0], &[2.0, 2.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]), 0.0);
    }
}
