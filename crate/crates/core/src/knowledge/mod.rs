//! Reference knowledge: Wikipedia articles, their passages, and BM25 retrieval.

mod chunk;
mod fetch;
mod index;
mod store;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{chunk_document, Passage};
pub use fetch::{
    strip_markup, ArticleCache, ArticleSource, FetchOrigin, KnowledgeBase, WikipediaClient, DEFAULT_WIKIPEDIA_API,
};
pub use index::{
    bm25_score, build_index, retrieve, CorpusStats, Posting, RetrievalIndex, BM25_B, BM25_K1, INDEX_FORMAT_VERSION,
};
pub use store::KnowledgeStore;

/// A fetched article reduced to plain text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeDocument {
    pub wikipedia_title: String,
    pub revision_id: String,
    pub plain_text: String,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KnowledgeError {
    #[error("article title must be non-empty")]
    EmptyTitle,
    #[error("no Wikipedia article titled {0:?}")]
    ArticleNotFound(String),
    #[error("network error fetching {title:?}: {message}")]
    Network { title: String, message: String },
    #[error("unexpected response for {title:?}: {message}")]
    BadResponse { title: String, message: String },
    #[error("article {0:?} is not cached and network access is disabled")]
    NotCached(String),
    #[error("article cache error: {0}")]
    Cache(String),
    #[error("cannot build an index over zero passages")]
    EmptyCorpus,
    #[error("invalid chunking parameters: window={window}, stride={stride}")]
    InvalidChunking { window: usize, stride: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("index file: {0}")]
    IndexFormat(String),
}

impl KnowledgeError {
    pub fn is_transient(&self) -> bool {
        matches!(self, KnowledgeError::Network { .. })
    }
}
