//! Okapi BM25 over passages.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KnowledgeError, Passage};
use crate::text::tokenize;
use crate::types::PassageId;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;
pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_passages: usize,
    /// Mean number of retrieval terms per passage.
    pub avg_passage_length: f64,
    pub document_frequency: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn idf(&self, term: &str) -> f64 {
        let df = self.document_frequency.get(term).copied().unwrap_or(0) as f64;
        let n = self.n_passages as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }
}

/// `passage` is a position in [`RetrievalIndex::passages`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub passage: usize,
    pub tf: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    pub format_version: u32,
    pub passages: Vec<Passage>,
    pub passage_lengths: Vec<usize>,
    pub corpus_stats: CorpusStats,
    pub postings: BTreeMap<String, Vec<Posting>>,
}

fn term_weight(tf: usize, len: usize, avg_len: f64, idf: f64) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let tf = tf as f64;
    let norm = 1.0 - BM25_B + BM25_B * len as f64 / avg_len;
    idf * (tf * (BM25_K1 + 1.0)) / (tf + BM25_K1 * norm)
}

/// BM25 score of one passage. Repeated query terms count once per occurrence.
pub fn bm25_score(query_terms: &[String], passage: &Passage, stats: &CorpusStats) -> f64 {
    let terms = tokenize(&passage.text);
    let mut tf: HashMap<&str, usize> = HashMap::new();
    for t in &terms {
        *tf.entry(t.as_str()).or_default() += 1;
    }
    query_terms
        .iter()
        .map(|q| {
            let f = tf.get(q.as_str()).copied().unwrap_or(0);
            term_weight(f, terms.len(), stats.avg_passage_length, stats.idf(q))
        })
        .sum()
}

pub fn build_index(passages: &[Passage]) -> Result<RetrievalIndex, KnowledgeError> {
    if passages.is_empty() {
        return Err(KnowledgeError::EmptyCorpus);
    }
    let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
    let mut lengths = Vec::with_capacity(passages.len());
    for (i, p) in passages.iter().enumerate() {
        let terms = tokenize(&p.text);
        lengths.push(terms.len());
        let mut tf: BTreeMap<String, usize> = BTreeMap::new();
        for t in terms {
            *tf.entry(t).or_default() += 1;
        }
        for (term, count) in tf {
            postings
                .entry(term)
                .or_default()
                .push(Posting { passage: i, tf: count });
        }
    }
    let document_frequency = postings.iter().map(|(t, ps)| (t.clone(), ps.len())).collect();
    let total: usize = lengths.iter().sum();
    Ok(RetrievalIndex {
        format_version: INDEX_FORMAT_VERSION,
        passages: passages.to_vec(),
        corpus_stats: CorpusStats {
            n_passages: passages.len(),
            avg_passage_length: total as f64 / passages.len() as f64,
            document_frequency,
        },
        passage_lengths: lengths,
        postings,
    })
}

/// Top-`k` passages for `query`, best first; ties go to the smaller passage id.
pub fn retrieve(index: &RetrievalIndex, query: &str, k: usize) -> Result<Vec<(PassageId, f64)>, KnowledgeError> {
    if k == 0 {
        return Err(KnowledgeError::InvalidK);
    }
    if index.passages.is_empty() {
        return Err(KnowledgeError::EmptyCorpus);
    }
    let stats = &index.corpus_stats;
    let mut scores = vec![0.0f64; index.passages.len()];
    for term in tokenize(query) {
        let Some(list) = index.postings.get(&term) else {
            continue;
        };
        let idf = stats.idf(&term);
        for p in list {
            scores[p.passage] += term_weight(p.tf, index.passage_lengths[p.passage], stats.avg_passage_length, idf);
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| index.passages[a].passage_id.cmp(&index.passages[b].passage_id))
    });
    Ok(order
        .into_iter()
        .take(k)
        .map(|i| (index.passages[i].passage_id.clone(), scores[i]))
        .collect())
}

impl RetrievalIndex {
    pub fn passage(&self, id: &PassageId) -> Option<&Passage> {
        self.passages.iter().find(|p| &p.passage_id == id)
    }

    pub fn contains(&self, id: &PassageId) -> bool {
        self.passage(id).is_some()
    }

    /// True when rebuilding from the stored passages reproduces this index.
    pub fn is_consistent(&self) -> bool {
        build_index(&self.passages).map(|i| &i == self).unwrap_or(false)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<RetrievalIndex, KnowledgeError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| KnowledgeError::IndexFormat(e.to_string()))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == INDEX_FORMAT_VERSION as u64 => {}
            other => {
                return Err(KnowledgeError::IndexFormat(format!(
                    "unsupported format_version {other:?}, expected {INDEX_FORMAT_VERSION}"
                )))
            }
        }
        serde_json::from_value(value).map_err(|e| KnowledgeError::IndexFormat(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), KnowledgeError> {
        std::fs::write(path, self.to_json()).map_err(|e| KnowledgeError::IndexFormat(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<RetrievalIndex, KnowledgeError> {
        let text = std::fs::read_to_string(path).map_err(|e| KnowledgeError::IndexFormat(e.to_string()))?;
        RetrievalIndex::from_json(&text)
    }
}
