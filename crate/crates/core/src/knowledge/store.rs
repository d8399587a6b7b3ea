use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::{build_index, chunk_document, KnowledgeBase, KnowledgeError, RetrievalIndex};

type Slot = Arc<OnceLock<Result<Arc<RetrievalIndex>, KnowledgeError>>>;

/// Builds and memoizes one retrieval index per article. Each article is
/// fetched and indexed at most once even under concurrent access; failures are
/// memoized too so a bad title fails fast for every unit that needs it.
pub struct KnowledgeStore {
    base: KnowledgeBase,
    window: usize,
    stride: usize,
    indexes: Mutex<HashMap<String, Slot>>,
}

impl KnowledgeStore {
    pub fn new(base: KnowledgeBase, window: usize, stride: usize) -> Self {
        KnowledgeStore {
            base,
            window,
            stride,
            indexes: Mutex::new(HashMap::new()),
        }
    }

    pub fn base(&self) -> &KnowledgeBase {
        &self.base
    }

    pub fn index_for(&self, title: &str) -> Result<Arc<RetrievalIndex>, KnowledgeError> {
        let slot = {
            let mut map = self.indexes.lock().unwrap();
            map.entry(title.to_string()).or_default().clone()
        };
        slot.get_or_init(|| {
            let doc = self.base.fetch_article(title)?;
            let passages = chunk_document(&doc, self.window, self.stride)?;
            build_index(&passages).map(Arc::new)
        })
        .clone()
    }
}
