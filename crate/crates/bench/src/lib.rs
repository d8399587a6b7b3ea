//! Workload generators for the benchmarks.

use geofact_core::knowledge::Passage;
use geofact_core::{Label, PassageId, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` passages of 40-160 words over a skewed `vocab`-word vocabulary.
pub fn corpus(n: usize, vocab: usize, seed: u64) -> Vec<Passage> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.gen_range(40..=160);
            let text = (0..len)
                .map(|_| {
                    let r: f64 = rng.gen();
                    format!("w{}", (r * r * vocab as f64) as usize)
                })
                .collect::<Vec<_>>()
                .join(" ");
            Passage {
                passage_id: PassageId {
                    title: format!("Article {}", i / 50),
                    ordinal: i % 50,
                },
                token_count: len,
                text,
            }
        })
        .collect()
}

/// Queries of 5-15 words drawn from the same vocabulary.
pub fn queries(n: usize, vocab: usize, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let len = rng.gen_range(5..=15);
            (0..len)
                .map(|_| format!("w{}", rng.gen_range(0..vocab)))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

pub fn verdicts(n: usize, seed: u64) -> Vec<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|fact_id| Verdict {
            fact_id,
            label: if rng.gen_bool(0.6) {
                Label::Supported
            } else {
                Label::NotSupported
            },
            judge_score: 1.0,
            lexical_score: 1.0,
            evidence_passage_ids: Vec::new(),
        })
        .collect()
}
