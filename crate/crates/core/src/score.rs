//! FActScore arithmetic: the fraction of a response's atomic facts that the
//! knowledge source supports.

use thiserror::Error;

use crate::types::Verdict;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ScoreError {
    /// No facts to score. The caller records the score as undefined.
    #[error("cannot score an empty fact list")]
    EmptyFactList,
}

/// Fraction of verdicts labelled `Supported`.
pub fn factscore(verdicts: &[Verdict]) -> Result<f64, ScoreError> {
    if verdicts.is_empty() {
        return Err(ScoreError::EmptyFactList);
    }
    let (correct, _) = fact_counts(verdicts);
    Ok(correct as f64 / verdicts.len() as f64)
}

/// `(n_correct, n_hallucinated)`; anything not supported counts as hallucinated.
pub fn fact_counts(verdicts: &[Verdict]) -> (usize, usize) {
    let correct = verdicts.iter().filter(|v| v.is_supported()).count();
    (correct, verdicts.len() - correct)
}
