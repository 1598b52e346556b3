//! Readers and writers for graph formats, embeddings and checkpoints.

pub mod canonical;
pub mod checkpoint;
pub mod embeddings;
pub mod penman;
pub mod sdp;

use thiserror::Error;

use crate::graph::GraphError;

pub use canonical::{
    read_arbor_records, read_canonical, write_arbor_records, write_canonical, ArborRecord,
    CanonicalGraphRecord,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, NamedTensor};
pub use embeddings::{load_embeddings, EmbeddingTable};
pub use penman::{read_penman, read_penman_corpus, write_penman};
pub use sdp::{read_sdp, read_sdp_corpus, write_sdp, SdpSentence, SdpToken};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("penman: {0}")]
    Penman(String),
    #[error("sdp: {0}")]
    Sdp(String),
    #[error("canonical: {0}")]
    Canonical(String),
    #[error("embeddings: {0}")]
    Embedding(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
