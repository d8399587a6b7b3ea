//! Multilingual factuality evaluation: generate biographies in many
//! languages, translate them to English, split them into atomic facts and
//! verify each fact against retrieved Wikipedia passages.

pub mod analytics;
pub mod config;
pub mod error;
pub mod gateway;
pub mod knowledge;
pub mod pipeline;
pub mod retry;
pub mod roster;
pub mod score;
pub mod synthetic;
pub mod text;
pub mod types;

pub use error::DomainError;
pub use roster::Roster;
pub use score::{fact_counts, factscore, ScoreError};
pub use types::*;
