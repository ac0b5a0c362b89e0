//! Ingestion and lexical statistics: word vectors, frame/object-pair
//! co-occurrence counts with PMI, and the labeled knowledge dataset.

mod cooccur;
mod dataset;
mod embeddings;

pub use cooccur::{pmi, CooccurrenceStats};
pub use dataset::{
    load_dataset, FrameItem, KnowledgeDataset, PairItem, Split, SplitAssignment, SplitProfile,
    SplitProfiles,
};
pub use embeddings::{cosine, load_embeddings, EmbeddingStore, HUMAN_TOKEN, HUMAN_PROXY};

use std::path::PathBuf;

use thiserror::Error;

use crate::domain::DomainError;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}", path = .path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Malformed { path: PathBuf, line: usize, msg: String },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("zero marginal count for {0}")]
    ZeroMarginal(String),
    #[error("dataset has no assignment for the 20/30/50 split profile ({0})")]
    MissingProfile(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

pub(crate) fn read_to_string(path: &std::path::Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-empty, non-comment lines with their 1-based numbers.
pub(crate) fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}
