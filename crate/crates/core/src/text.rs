//! Tokenization and sentence segmentation shared by retrieval, decomposition
//! and the lexical support score.

use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

fn punctuation() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\p{P}").unwrap())
}

/// NFC-normalizes and lowercases.
pub fn normalize(text: &str) -> String {
    text.nfc().collect::<String>().to_lowercase()
}

/// Retrieval terms: NFC, lowercase, whitespace split, punctuation stripped.
/// Tokens that are pure punctuation disappear. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    let normalized = normalize(text);
    normalized
        .split_whitespace()
        .map(|tok| punctuation().replace_all(tok, "").into_owned())
        .filter(|tok| !tok.is_empty())
        .collect()
}

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "also", "an", "and", "are", "as", "at", "be", "been", "before", "being", "but", "by", "did",
    "do", "does", "during", "for", "from", "had", "has", "have", "he", "her", "hers", "him", "his", "i", "in", "into",
    "is", "it", "its", "of", "on", "or", "she", "so", "than", "that", "the", "their", "them", "then", "there", "these",
    "they", "this", "those", "to", "was", "were", "which", "while", "who", "whom", "whose", "will", "with", "would",
];

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.binary_search(&token).is_ok()
}

/// Tokens of `text` that carry content: [`tokenize`] minus English stopwords.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

// Lowercased, without the trailing period.
const ABBREVIATIONS: &[&str] = &[
    "adm", "apr", "aug", "capt", "co", "col", "corp", "dec", "dept", "dr", "e.g", "etc", "feb", "gen", "gov", "i.e",
    "inc", "jan", "jr", "jul", "jun", "lt", "ltd", "mar", "mr", "mrs", "ms", "mt", "nov", "oct", "prof", "rep", "rev",
    "sen", "sep", "sept", "sgt", "sr", "st", "u.k", "u.n", "u.s", "vs",
];

fn is_abbreviation(word: &str) -> bool {
    let w = word.trim_start_matches(|c: char| !c.is_alphanumeric());
    let stem = w.strip_suffix('.').unwrap_or(w).to_lowercase();
    if ABBREVIATIONS.contains(&stem.as_str()) {
        return true;
    }
    // Single-letter initials such as "J." in "John F. Kennedy".
    let mut chars = stem.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_alphabetic())
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '。' | '！' | '？' | '।')
}

fn is_closing(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '”' | '’' | '»' | '」')
}

/// Splits text into sentences.
///
/// A sentence ends at terminal punctuation (optionally followed by closing
/// quotes or brackets) that is followed by whitespace or end of text, unless
/// the word carrying a period is a known abbreviation or a single-letter
/// initial. CJK full stops end a sentence without trailing whitespace.
/// Returned sentences are trimmed and never empty.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if is_terminal(c) {
            let mut end = i + 1;
            while end < chars.len() && (is_terminal(chars[end]) || is_closing(chars[end])) {
                end += 1;
            }
            let at_boundary = end == chars.len() || chars[end].is_whitespace() || matches!(c, '。' | '！' | '？');
            if at_boundary && !(c == '.' && ends_with_abbreviation(&chars[start..=i])) {
                push_trimmed(&mut sentences, &chars[start..end]);
                start = end;
            }
            i = end;
        } else if c == '\n' && i + 1 < chars.len() && chars[i + 1] == '\n' {
            // Blank lines separate paragraphs and headings.
            push_trimmed(&mut sentences, &chars[start..i]);
            start = i;
            i += 1;
        } else {
            i += 1;
        }
    }
    push_trimmed(&mut sentences, &chars[start..]);
    sentences
}

fn ends_with_abbreviation(span: &[char]) -> bool {
    let s: String = span.iter().collect();
    let word = s.split_whitespace().last().unwrap_or("");
    is_abbreviation(word)
}

fn push_trimmed(out: &mut Vec<String>, span: &[char]) {
    let s: String = span.iter().collect();
    let s = s.trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}
