use serde::{Deserialize, Serialize};

use super::{KnowledgeDocument, KnowledgeError};
use crate::types::PassageId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: PassageId,
    pub text: String,
    /// Whitespace tokens in this passage; never exceeds the chunk window.
    pub token_count: usize,
}

/// Cuts a document into sliding windows of whitespace tokens.
///
/// A document no longer than `window` becomes a single passage. Otherwise a
/// window starts at every multiple of `stride` below the token count, so the
/// final windows may be partial. Passage text is the window's tokens joined by
/// single spaces.
pub fn chunk_document(doc: &KnowledgeDocument, window: usize, stride: usize) -> Result<Vec<Passage>, KnowledgeError> {
    if window == 0 || stride == 0 || stride > window {
        return Err(KnowledgeError::InvalidChunking { window, stride });
    }
    let tokens: Vec<&str> = doc.plain_text.split_whitespace().collect();
    let starts: Vec<usize> = if tokens.len() <= window {
        if tokens.is_empty() {
            vec![]
        } else {
            vec![0]
        }
    } else {
        (0..tokens.len()).step_by(stride).collect()
    };
    Ok(starts
        .into_iter()
        .enumerate()
        .map(|(ordinal, start)| {
            let end = (start + window).min(tokens.len());
            Passage {
                passage_id: PassageId {
                    title: doc.wikipedia_title.clone(),
                    ordinal,
                },
                text: tokens[start..end].join(" "),
                token_count: end - start,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::DateTime;
    use proptest::prelude::*;

    fn doc(n: usize) -> KnowledgeDocument {
        KnowledgeDocument {
            wikipedia_title: "T".into(),
            revision_id: "1".into(),
            plain_text: (0..n).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" "),
            fetched_at: DateTime::UNIX_EPOCH,
        }
    }

    fn first_token(p: &Passage) -> usize {
        p.text.split(' ').next().unwrap()[1..].parse().unwrap()
    }

    #[test]
    fn ten_tokens_window_four() {
        let ps = chunk_document(&doc(10), 4, 4).unwrap();
        let sizes: Vec<_> = ps.iter().map(|p| p.token_count).collect();
        assert_eq!(sizes, vec![4, 4, 2]);
        assert_eq!(ps[2].text, "w8 w9");
        assert_eq!(ps[2].passage_id.ordinal, 2);
    }

    #[test]
    fn window_covering_document_gives_one_passage() {
        assert_eq!(chunk_document(&doc(5), 5, 2).unwrap().len(), 1);
        assert_eq!(chunk_document(&doc(5), 256, 128).unwrap().len(), 1);
    }

    #[test]
    fn overlapping_starts() {
        let ps = chunk_document(&doc(8), 4, 2).unwrap();
        let starts: Vec<_> = ps.iter().map(first_token).collect();
        assert_eq!(starts, vec![0, 2, 4, 6]);
    }

    #[test]
    fn bad_parameters_and_empty_doc() {
        assert!(chunk_document(&doc(3), 0, 1).is_err());
        assert!(chunk_document(&doc(3), 2, 0).is_err());
        assert!(chunk_document(&doc(3), 2, 3).is_err());
        assert!(chunk_document(&doc(0), 4, 4).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn non_overlapping_windows_reconstruct_tokens(n in 1usize..300, window in 1usize..40) {
            let d = doc(n);
            let ps = chunk_document(&d, window, window).unwrap();
            let joined: Vec<String> = ps.iter().flat_map(|p| p.text.split(' ').map(String::from).collect::<Vec<_>>()).collect();
            let original: Vec<String> = d.plain_text.split_whitespace().map(String::from).collect();
            prop_assert_eq!(joined, original);
        }

        #[test]
        fn every_token_covered(n in 1usize..200, window in 1usize..30, stride_frac in 0.0f64..1.0) {
            let stride = ((window as f64 * stride_frac) as usize).clamp(1, window);
            let ps = chunk_document(&doc(n), window, stride).unwrap();
            let mut covered = vec![false; n];
            for p in &ps {
                prop_assert!(p.token_count <= window);
                let s = first_token(p);
                for c in covered.iter_mut().skip(s).take(p.token_count) { *c = true; }
            }
            prop_assert!(covered.iter().all(|c| *c));
        }
    }
}
