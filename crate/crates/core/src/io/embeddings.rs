//! Whitespace-separated word vectors (`word f1 ... fd` per line) and
//! precomputed per-token external vectors.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FormatError;

/// Word vectors with case-sensitive lookup, lowercase fallback, then a
/// shared unknown vector.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    unk: Vec<f32>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            unk: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, word: impl Into<String>, v: Vec<f32>) -> Result<(), FormatError> {
        if v.len() != self.dim {
            return Err(FormatError::Dimension {
                expected: self.dim,
                found: v.len(),
            });
        }
        self.vectors.insert(word.into(), v);
        Ok(())
    }

    /// Exact match, then lowercase.
    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors
            .get(word)
            .or_else(|| self.vectors.get(&word.to_lowercase()))
            .map(Vec::as_slice)
    }

    pub fn lookup(&self, word: &str) -> &[f32] {
        self.get(word).unwrap_or(&self.unk)
    }

    /// Parses vectors of dimension `dim`. A leading `count dim` header line
    /// (word2vec text format) is accepted and checked.
    pub fn parse(text: &str, dim: usize) -> Result<Self, FormatError> {
        let mut table = EmbeddingTable::new(dim);
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                let declared: usize = fields[1].parse().unwrap_or(0);
                if declared != dim {
                    return Err(FormatError::Dimension {
                        expected: dim,
                        found: declared,
                    });
                }
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f32>())
                .collect::<Result<Vec<f32>, _>>()
                .map_err(|e| FormatError::Embedding(format!("line {}: {e}", i + 1)))?;
            if values.len() != dim {
                return Err(FormatError::Dimension {
                    expected: dim,
                    found: values.len(),
                });
            }
            table.vectors.insert(fields[0].to_string(), values);
        }
        Ok(table)
    }
}

pub fn load_embeddings(path: &Path, dim: usize) -> Result<EmbeddingTable, FormatError> {
    let text = std::fs::read_to_string(path)?;
    EmbeddingTable::parse(&text, dim)
}

/// Frozen per-token vectors for one sentence, keyed by record id. Stored as
/// JSON lines `{"id": ..., "vectors": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalEmbeddings {
    pub id: String,
    pub vectors: Vec<Vec<f32>>,
}

pub fn read_external_embeddings(text: &str, dim: usize) -> Result<HashMap<String, Vec<Vec<f32>>>, FormatError> {
    let rows: Vec<ExternalEmbeddings> = super::canonical::read_jsonl(text)?;
    let mut out = HashMap::new();
    for r in rows {
        if let Some(v) = r.vectors.iter().find(|v| v.len() != dim) {
            return Err(FormatError::Dimension {
                expected: dim,
                found: v.len(),
            });
        }
        out.insert(r.id, r.vectors);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_falls_back() {
        let t = EmbeddingTable::parse("the 0.1 0.2\nParis 1 2\n", 2).unwrap();
        assert_eq!(t.lookup("the"), &[0.1, 0.2]);
        assert_eq!(t.lookup("THE"), &[0.1, 0.2]);
        assert_eq!(t.lookup("Paris"), &[1.0, 2.0]);
        assert_eq!(t.lookup("paris"), &[0.0, 0.0]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let err = EmbeddingTable::parse("the 0.1 0.2", 3).unwrap_err();
        assert!(matches!(err, FormatError::Dimension { expected: 3, found: 2 }));
    }

    #[test]
    fn accepts_word2vec_header() {
        let t = EmbeddingTable::parse("1 2\nthe 0.1 0.2\n", 2).unwrap();
        assert_eq!(t.len(), 1);
    }

    #[test]
    fn external_rows_are_checked() {
        let ok = read_external_embeddings(r#"{"id":"a","vectors":[[1,2],[3,4]]}"#, 2).unwrap();
        assert_eq!(ok["a"].len(), 2);
        assert!(read_external_embeddings(r#"{"id":"a","vectors":[[1,2,3]]}"#, 2).is_err());
    }
}
