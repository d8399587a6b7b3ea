use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DomainError {
    #[error("unknown language code {0:?}; expected one of en, de, fr, es, ar, sw, zh, ko, bn")]
    UnknownLanguage(String),
    #[error("invalid geo tag: {0}")]
    InvalidGeoTag(String),
    #[error("invalid topic {0:?}: {1}")]
    InvalidTopic(String, String),
    #[error("roster line {line}: {message}")]
    RosterParse { line: usize, message: String },
    #[error("duplicate topic id {0:?}")]
    DuplicateTopic(String),
    #[error("roster is empty")]
    EmptyRoster,
    #[error("unknown topic id {0:?}")]
    UnknownTopic(String),
}
