use std::collections::HashMap;
use std::path::Path;

use log::warn;

use super::{content_lines, read_to_string, DataError};

/// Placeholder object for human arguments.
pub const HUMAN_TOKEN: &str = "HUMAN";
/// Word whose vector stands in for [`HUMAN_TOKEN`].
pub const HUMAN_PROXY: &str = "person";

/// Pretrained word vectors of one fixed dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore {
            dim,
            vectors: HashMap::new(),
        }
    }

    /// Parses "word v1 ... vd" lines. Duplicate words keep their first row.
    pub fn parse(text: &str, expected_dim: usize, origin: &Path) -> Result<Self, DataError> {
        let mut store = EmbeddingStore::new(expected_dim);
        for (line, row) in content_lines(text) {
            let mut fields = row.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| DataError::Malformed {
                    path: origin.to_path_buf(),
                    line,
                    msg: format!("non-numeric value: {e}"),
                })?;
            if values.len() != expected_dim {
                return Err(DataError::Malformed {
                    path: origin.to_path_buf(),
                    line,
                    msg: format!("expected {expected_dim} values, found {}", values.len()),
                });
            }
            if store.vectors.contains_key(word) {
                warn!("{}:{line}: duplicate vector for `{word}`, keeping the first", origin.display());
                continue;
            }
            store.vectors.insert(word.to_string(), values);
        }
        Ok(store)
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<(), DataError> {
        if vector.len() != self.dim {
            return Err(DataError::DimensionMismatch {
                left: self.dim,
                right: vector.len(),
            });
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
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

    /// Vector for `word`; the human placeholder resolves to its proxy.
    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice).or_else(|| {
            (word == HUMAN_TOKEN)
                .then(|| self.vectors.get(HUMAN_PROXY).map(Vec::as_slice))
                .flatten()
        })
    }

    /// Words in sorted order.
    pub fn words(&self) -> Vec<&str> {
        let mut w: Vec<&str> = self.vectors.keys().map(String::as_str).collect();
        w.sort_unstable();
        w
    }
}

pub fn load_embeddings(path: impl AsRef<Path>, expected_dim: usize) -> Result<EmbeddingStore, DataError> {
    let path = path.as_ref();
    EmbeddingStore::parse(&read_to_string(path)?, expected_dim, path)
}

/// Cosine similarity; zero when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, DataError> {
    if u.len() != v.len() {
        return Err(DataError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    #[test]
    fn loads_well_formed_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nperson 0.25 -1.5 3e-2\nball 1 2 3").unwrap();
        let store = load_embeddings(f.path(), 3).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store.dim(), 3);
        assert_eq!(store.get("person").unwrap(), &[0.25, -1.5, 0.03]);
        assert_eq!(store.get(HUMAN_TOKEN).unwrap(), store.get("person").unwrap());
        assert!(store.get("zebra").is_none());
    }

    #[test]
    fn lookup_returns_file_floats_exactly() {
        let text = "person 0.123456789012345678 -7.5e-8\n";
        let store = EmbeddingStore::parse(text, 2, Path::new("mem")).unwrap();
        // re-read the raw tokens independently of the loader
        let raw: Vec<f64> = text.split_whitespace().skip(1).map(|t| t.parse().unwrap()).collect();
        assert_eq!(store.get("person").unwrap(), raw.as_slice());
    }

    #[test]
    fn short_row_names_line() {
        let err = EmbeddingStore::parse("a 1 2 3\nb 1 2\n", 3, Path::new("vecs.txt")).unwrap_err();
        match err {
            DataError::Malformed { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        assert!(EmbeddingStore::parse("a 1 x 3\n", 3, Path::new("v")).is_err());
    }

    #[test]
    fn duplicates_keep_first() {
        let store = EmbeddingStore::parse("a 1 2\na 3 4\n", 2, Path::new("v")).unwrap();
        assert_eq!(store.get("a").unwrap(), &[1.0, 2.0]);
    }

    #[test]
    fn cosine_examples() {
        assert!((cosine(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert!(cosine(&[1.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_bounded(
            u in proptest::collection::vec(-10.0f64..10.0, 5),
            v in proptest::collection::vec(-10.0f64..10.0, 5),
        ) {
            let a = cosine(&u, &v).unwrap();
            let b = cosine(&v, &u).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a.abs() <= 1.0 + 1e-12);
        }
    }
}
