use std::path::{Path, PathBuf};
use std::sync::{Mutex, OnceLock};
use std::time::Duration;

use chrono::Utc;
use percent_encoding::{utf8_percent_encode, AsciiSet, NON_ALPHANUMERIC};
use regex::Regex;
use serde::Deserialize;

use super::{KnowledgeDocument, KnowledgeError};
use crate::retry::RetryPolicy;

/// Anything that can produce an article by title.
pub trait ArticleSource: Send + Sync {
    fn fetch(&self, title: &str) -> Result<KnowledgeDocument, KnowledgeError>;
}

/// Fetches plain-text extracts from the MediaWiki action API.
pub struct WikipediaClient {
    api_url: String,
    http: reqwest::blocking::Client,
    retry: RetryPolicy,
}

pub const DEFAULT_WIKIPEDIA_API: &str = "https://en.wikipedia.org/w/api.php";

impl WikipediaClient {
    pub fn new(api_url: impl Into<String>, retry: RetryPolicy) -> Self {
        let http = reqwest::blocking::Client::builder()
            .user_agent(concat!("geofact/", env!("CARGO_PKG_VERSION")))
            .timeout(Duration::from_secs(30))
            .build()
            .expect("http client builds");
        WikipediaClient {
            api_url: api_url.into(),
            http,
            retry,
        }
    }

    fn fetch_once(&self, title: &str) -> Result<KnowledgeDocument, KnowledgeError> {
        let network = |message: String| KnowledgeError::Network {
            title: title.to_string(),
            message,
        };
        let response = self
            .http
            .get(&self.api_url)
            .query(&[
                ("action", "query"),
                ("format", "json"),
                ("formatversion", "2"),
                ("prop", "extracts|revisions"),
                ("explaintext", "1"),
                ("exsectionformat", "plain"),
                ("rvprop", "ids"),
                ("redirects", "1"),
                ("titles", title),
            ])
            .send()
            .map_err(|e| network(e.to_string()))?;
        let status = response.status();
        if status.as_u16() == 429 || status.is_server_error() {
            return Err(network(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(KnowledgeError::BadResponse {
                title: title.to_string(),
                message: format!("HTTP {status}"),
            });
        }
        let body = response.text().map_err(|e| network(e.to_string()))?;
        parse_query_response(title, &body)
    }
}

impl ArticleSource for WikipediaClient {
    fn fetch(&self, title: &str) -> Result<KnowledgeDocument, KnowledgeError> {
        self.retry.run(KnowledgeError::is_transient, || self.fetch_once(title))
    }
}

#[derive(Deserialize)]
struct ApiResponse {
    query: Option<ApiQuery>,
}

#[derive(Deserialize)]
struct ApiQuery {
    #[serde(default)]
    pages: Vec<ApiPage>,
}

#[derive(Deserialize)]
struct ApiPage {
    #[serde(default)]
    missing: bool,
    #[serde(default)]
    invalid: bool,
    extract: Option<String>,
    #[serde(default)]
    revisions: Vec<ApiRevision>,
}

#[derive(Deserialize)]
struct ApiRevision {
    revid: u64,
}

/// Parses a `formatversion=2` query response carrying an extract and revision id.
pub(crate) fn parse_query_response(title: &str, body: &str) -> Result<KnowledgeDocument, KnowledgeError> {
    let bad = |message: String| KnowledgeError::BadResponse {
        title: title.to_string(),
        message,
    };
    let parsed: ApiResponse = serde_json::from_str(body).map_err(|e| bad(e.to_string()))?;
    let page = parsed
        .query
        .and_then(|q| q.pages.into_iter().next())
        .ok_or_else(|| bad("no pages in response".into()))?;
    if page.missing || page.invalid {
        return Err(KnowledgeError::ArticleNotFound(title.to_string()));
    }
    let text = strip_markup(&page.extract.unwrap_or_default());
    if text.is_empty() {
        return Err(KnowledgeError::ArticleNotFound(title.to_string()));
    }
    let revision_id = page
        .revisions
        .first()
        .map(|r| r.revid.to_string())
        .ok_or_else(|| bad("missing revision id".into()))?;
    Ok(KnowledgeDocument {
        wikipedia_title: title.to_string(),
        revision_id,
        plain_text: text,
        fetched_at: Utc::now(),
    })
}

fn markup_patterns() -> &'static [(Regex, &'static str)] {
    static PATTERNS: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    PATTERNS.get_or_init(|| {
        [
            (r"(?s)<!--.*?-->", ""),
            (r"(?s)<ref[^>]*/>", ""),
            (r"(?s)<ref[^>]*>.*?</ref>", ""),
            (r"(?s)\{\{[^{}]*\}\}", ""),
            (r"\[\[(?:[^\]|]*\|)?([^\]]*)\]\]", "$1"),
            (r"\[https?://\S+ ([^\]]*)\]", "$1"),
            (r"'{2,}", ""),
            (r"</?[a-zA-Z][^>]*>", ""),
            (r"(?m)^[ \t]*=+[ \t]*(.*?)[ \t]*=+[ \t]*$", "$1"),
        ]
        .into_iter()
        .map(|(p, r)| (Regex::new(p).unwrap(), r))
        .collect()
    })
}

/// Removes residual wiki markup (headings, links, templates, refs, tags, bold
/// and italic quotes) and normalizes blank lines.
pub fn strip_markup(text: &str) -> String {
    let mut out = text.to_string();
    for (re, rep) in markup_patterns() {
        // Nested templates need repeated passes.
        loop {
            let next = re.replace_all(&out, *rep).into_owned();
            if next == out {
                break;
            }
            out = next;
        }
    }
    let mut lines = Vec::new();
    let mut blank = false;
    for line in out.lines().map(str::trim) {
        if line.is_empty() {
            blank = !lines.is_empty();
            continue;
        }
        if blank {
            lines.push(String::new());
            blank = false;
        }
        lines.push(line.to_string());
    }
    lines.join("\n")
}

const TITLE_ENCODE: &AsciiSet = &NON_ALPHANUMERIC.remove(b'-').remove(b'_');

/// One JSON file per article, named by the percent-encoded title.
pub struct ArticleCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ArticleCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ArticleCache {
            dir: dir.into(),
            write_lock: Mutex::new(()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, title: &str) -> PathBuf {
        self.dir
            .join(format!("{}.json", utf8_percent_encode(title, TITLE_ENCODE)))
    }

    pub fn get(&self, title: &str) -> Result<Option<KnowledgeDocument>, KnowledgeError> {
        let path = self.path_for(title);
        match std::fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text)
                .map(Some)
                .map_err(|e| KnowledgeError::Cache(format!("{}: {e}", path.display()))),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(KnowledgeError::Cache(format!("{}: {e}", path.display()))),
        }
    }

    /// Atomically writes the document (temp file, then rename).
    pub fn put(&self, doc: &KnowledgeDocument) -> Result<(), KnowledgeError> {
        let _guard = self.write_lock.lock().unwrap();
        let cache_err = |e: std::io::Error| KnowledgeError::Cache(e.to_string());
        std::fs::create_dir_all(&self.dir).map_err(cache_err)?;
        let json = serde_json::to_string_pretty(doc).expect("document serializes");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(cache_err)?;
        std::io::Write::write_all(&mut tmp, json.as_bytes()).map_err(cache_err)?;
        tmp.persist(self.path_for(&doc.wikipedia_title))
            .map_err(|e| cache_err(e.error))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FetchOrigin {
    Cache,
    Network,
}

/// Cache-first article access. With no source configured it is offline and
/// only serves cached articles.
pub struct KnowledgeBase {
    cache: ArticleCache,
    source: Option<Box<dyn ArticleSource>>,
}

impl KnowledgeBase {
    pub fn new(cache: ArticleCache, source: Box<dyn ArticleSource>) -> Self {
        KnowledgeBase {
            cache,
            source: Some(source),
        }
    }

    pub fn offline(cache: ArticleCache) -> Self {
        KnowledgeBase { cache, source: None }
    }

    pub fn cache(&self) -> &ArticleCache {
        &self.cache
    }

    pub fn fetch_article(&self, title: &str) -> Result<KnowledgeDocument, KnowledgeError> {
        self.fetch_with_origin(title).map(|(doc, _)| doc)
    }

    pub fn fetch_with_origin(&self, title: &str) -> Result<(KnowledgeDocument, FetchOrigin), KnowledgeError> {
        if title.trim().is_empty() {
            return Err(KnowledgeError::EmptyTitle);
        }
        if let Some(doc) = self.cache.get(title)? {
            return Ok((doc, FetchOrigin::Cache));
        }
        let source = self
            .source
            .as_ref()
            .ok_or_else(|| KnowledgeError::NotCached(title.to_string()))?;
        let mut doc = source.fetch(title)?;
        doc.wikipedia_title = title.to_string();
        self.cache.put(&doc)?;
        Ok((doc, FetchOrigin::Network))
    }
}
