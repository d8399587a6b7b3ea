//! Uniform access to text-generation backends.
//!
//! Every stage goes through [`Gateway::complete`], which consults an on-disk
//! response cache before spending a call, enforces a shared call budget,
//! rate-limits, and retries transient failures with exponential backoff.

mod cache;
mod http;
mod limiter;
mod mock;
mod templates;

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;

use chrono::Utc;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{CacheEntry, CacheKey, ResponseCache};
pub use http::HttpChatTransport;
pub use limiter::{Permit, RateLimiter};
pub use mock::{ClaimPlan, MockSettings, MockTransport, MOCK_REFUSAL};
pub use templates::{PromptTemplate, TemplateError, TemplateId, TemplateMatch, TemplateRegistry};

use crate::retry::RetryPolicy;
use crate::roster::Roster;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat,
    Mock,
}

fn default_max_retries() -> u32 {
    4
}
fn default_timeout() -> u64 {
    120
}
fn default_retry_delay() -> u64 {
    1000
}
fn default_in_flight() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    2048
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSpec {
    pub backend_kind: BackendKind,
    pub model_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    /// Name of the environment variable holding the API key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub credentials_env_var: Option<String>,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retry_delay")]
    pub retry_base_delay_ms: u64,
    #[serde(default = "default_in_flight")]
    pub max_in_flight: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_minute: Option<u32>,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockSettings>,
}

impl BackendSpec {
    pub fn mock(model_id: &str) -> Self {
        BackendSpec {
            backend_kind: BackendKind::Mock,
            model_id: model_id.to_string(),
            endpoint_url: None,
            credentials_env_var: None,
            max_retries: default_max_retries(),
            timeout_secs: default_timeout(),
            retry_base_delay_ms: default_retry_delay(),
            max_in_flight: default_in_flight(),
            requests_per_minute: None,
            max_tokens: default_max_tokens(),
            mock: None,
        }
    }

    pub fn http_chat(model_id: &str, endpoint_url: &str, credentials_env_var: &str) -> Self {
        BackendSpec {
            backend_kind: BackendKind::HttpChat,
            endpoint_url: Some(endpoint_url.to_string()),
            credentials_env_var: Some(credentials_env_var.to_string()),
            ..BackendSpec::mock(model_id)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.model_id.trim().is_empty() {
            return Err("model_id must be non-empty".into());
        }
        match self.backend_kind {
            BackendKind::Mock => {
                if let Some(m) = &self.mock {
                    m.validate()?;
                }
            }
            BackendKind::HttpChat => {
                if self.endpoint_url.as_deref().unwrap_or("").is_empty() {
                    return Err(format!("backend {:?}: http_chat requires endpoint_url", self.model_id));
                }
                if self.credentials_env_var.as_deref().unwrap_or("").is_empty() {
                    return Err(format!(
                        "backend {:?}: http_chat requires credentials_env_var (secrets are never read from config)",
                        self.model_id
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            base_delay_ms: self.retry_base_delay_ms,
            factor: 2.0,
            max_delay_ms: 60_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Drives the mock backend; HTTP backends ignore it but it still keys the cache.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub text: String,
    pub model_id: String,
    pub cached: bool,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("backend unavailable after retries: {0}")]
    BackendUnavailable(String),
    /// Retryable failure; surfaces as `BackendUnavailable` once retries run out.
    #[error("transient backend failure: {0}")]
    Transient(String),
    #[error("authentication failed: {0}")]
    AuthError(String),
    #[error("call budget of {limit} uncached requests exhausted; raise run.max_calls or reuse the response cache")]
    BudgetExceeded { limit: u64 },
    #[error("invalid backend response: {0}")]
    InvalidResponse(String),
    #[error("response cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Transient(_))
    }
}

/// The wire-level call to a backend, without caching or retries.
pub trait Transport: Send + Sync {
    fn send(&self, model_id: &str, request: &CompletionRequest) -> Result<String, GatewayError>;
}

/// Ceiling on uncached backend calls, shared by every gateway in a run.
#[derive(Debug, Default)]
pub struct CallBudget {
    limit: Option<u64>,
    used: AtomicU64,
}

impl CallBudget {
    pub fn new(limit: Option<u64>) -> Self {
        CallBudget {
            limit,
            used: AtomicU64::new(0),
        }
    }

    pub fn unlimited() -> Self {
        CallBudget::new(None)
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    fn try_consume(&self) -> Result<(), GatewayError> {
        let Some(limit) = self.limit else {
            self.used.fetch_add(1, Ordering::SeqCst);
            return Ok(());
        };
        self.used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < limit).then_some(u + 1))
            .map(|_| ())
            .map_err(|_| GatewayError::BudgetExceeded { limit })
    }
}

/// Builds the transport a spec asks for. The mock answers from `roster` and
/// recognizes prompts rendered from `templates`.
pub fn transport_for(
    spec: &BackendSpec,
    roster: Arc<Roster>,
    templates: Arc<TemplateRegistry>,
) -> Result<Box<dyn Transport>, GatewayError> {
    Ok(match spec.backend_kind {
        BackendKind::Mock => Box::new(MockTransport::new(
            spec.mock.clone().unwrap_or_default(),
            roster,
            templates,
        )),
        BackendKind::HttpChat => Box::new(HttpChatTransport::from_spec(spec)?),
    })
}

pub struct Gateway {
    spec: BackendSpec,
    transport: Box<dyn Transport>,
    cache: Arc<ResponseCache>,
    budget: Arc<CallBudget>,
    limiter: RateLimiter,
    network_calls: AtomicUsize,
}

impl Gateway {
    pub fn new(
        spec: BackendSpec,
        transport: Box<dyn Transport>,
        cache: Arc<ResponseCache>,
        budget: Arc<CallBudget>,
    ) -> Self {
        let limiter = RateLimiter::new(spec.max_in_flight, spec.requests_per_minute);
        Gateway {
            spec,
            transport,
            cache,
            budget,
            limiter,
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn spec(&self) -> &BackendSpec {
        &self.spec
    }

    pub fn model_id(&self) -> &str {
        &self.spec.model_id
    }

    /// Backend calls attempted by this gateway, retries included.
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &CompletionRequest) -> Result<CompletionResult, GatewayError> {
        if request.temperature.is_nan() || request.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest(format!(
                "temperature must be >= 0, got {}",
                request.temperature
            )));
        }
        let key = CacheKey::new(&self.spec.model_id, request);
        let digest = key.digest();
        let lock = self.cache.key_lock(&digest);
        let _held = lock.lock().unwrap();

        if let Some(entry) = self.cache.get(&key)? {
            return Ok(CompletionResult {
                text: entry.response,
                model_id: self.spec.model_id.clone(),
                cached: true,
            });
        }

        self.budget.try_consume()?;
        let text = {
            let _permit = self.limiter.acquire();
            self.spec
                .retry_policy()
                .run(GatewayError::is_transient, || {
                    self.network_calls.fetch_add(1, Ordering::SeqCst);
                    self.transport.send(&self.spec.model_id, request)
                })
                .map_err(|e| match e {
                    GatewayError::Transient(msg) => GatewayError::BackendUnavailable(msg),
                    other => other,
                })?
        };

        self.cache.put(&CacheEntry {
            key,
            prompt: request.prompt.clone(),
            max_tokens: request.max_tokens,
            response: text.clone(),
            created_at: Utc::now(),
        })?;
        Ok(CompletionResult {
            text,
            model_id: self.spec.model_id.clone(),
            cached: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Mutex;

    /// Fails with the scripted errors in order, then answers with the prompt length.
    struct Scripted {
        failures: Mutex<Vec<GatewayError>>,
    }

    impl Scripted {
        fn new(failures: Vec<GatewayError>) -> Self {
            Scripted {
                failures: Mutex::new(failures),
            }
        }
    }

    impl Transport for Scripted {
        fn send(&self, _model: &str, request: &CompletionRequest) -> Result<String, GatewayError> {
            let mut f = self.failures.lock().unwrap();
            if f.is_empty() {
                Ok(format!("len={}", request.prompt.len()))
            } else {
                Err(f.remove(0))
            }
        }
    }

    fn spec() -> BackendSpec {
        BackendSpec {
            max_retries: 2,
            retry_base_delay_ms: 0,
            ..BackendSpec::mock("scripted")
        }
    }

    fn request(prompt: &str) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 1.0,
            max_tokens: 8,
            seed: 0,
        }
    }

    fn gateway(dir: &std::path::Path, transport: Scripted, budget: Option<u64>) -> Gateway {
        Gateway::new(
            spec(),
            Box::new(transport),
            Arc::new(ResponseCache::new(dir)),
            Arc::new(CallBudget::new(budget)),
        )
    }

    #[test]
    fn second_identical_call_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), Scripted::new(vec![]), None);
        let a = gw.complete(&request("hello")).unwrap();
        let b = gw.complete(&request("hello")).unwrap();
        assert!(!a.cached);
        assert!(b.cached);
        assert_eq!(a.text, b.text);
        assert_eq!(gw.network_calls(), 1);

        // A fresh gateway over the same directory makes no calls either.
        let gw2 = gateway(
            dir.path(),
            Scripted::new(vec![GatewayError::AuthError("x".into())]),
            None,
        );
        assert_eq!(gw2.complete(&request("hello")).unwrap().text, a.text);
        assert_eq!(gw2.network_calls(), 0);
    }

    #[test]
    fn transient_failures_are_retried() {
        let dir = tempfile::tempdir().unwrap();
        let t = Scripted::new(vec![
            GatewayError::Transient("503".into()),
            GatewayError::Transient("429".into()),
        ]);
        let gw = gateway(dir.path(), t, None);
        assert_eq!(gw.complete(&request("abc")).unwrap().text, "len=3");
        assert_eq!(gw.network_calls(), 3);
    }

    #[test]
    fn exhausted_retries_surface_as_unavailable() {
        let dir = tempfile::tempdir().unwrap();
        let t = Scripted::new(vec![GatewayError::Transient("503".into()); 3]);
        let gw = gateway(dir.path(), t, None);
        assert_eq!(
            gw.complete(&request("abc")),
            Err(GatewayError::BackendUnavailable("503".into()))
        );
        assert_eq!(gw.network_calls(), 3);
    }

    #[test]
    fn auth_errors_are_not_retried() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(
            dir.path(),
            Scripted::new(vec![GatewayError::AuthError("401".into())]),
            None,
        );
        assert!(matches!(gw.complete(&request("abc")), Err(GatewayError::AuthError(_))));
        assert_eq!(gw.network_calls(), 1);
    }

    #[test]
    fn budget_ceiling() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), Scripted::new(vec![]), Some(10));
        for i in 0..10 {
            gw.complete(&request(&format!("p{i}"))).unwrap();
        }
        // cached repeats are free
        gw.complete(&request("p3")).unwrap();
        assert_eq!(
            gw.complete(&request("p10")),
            Err(GatewayError::BudgetExceeded { limit: 10 })
        );
    }

    #[test]
    fn negative_temperature_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), Scripted::new(vec![]), None);
        let mut r = request("x");
        r.temperature = -0.5;
        assert!(matches!(gw.complete(&r), Err(GatewayError::InvalidRequest(_))));
    }

    #[test]
    fn concurrent_misses_on_one_key_call_once() {
        let dir = tempfile::tempdir().unwrap();
        let gw = gateway(dir.path(), Scripted::new(vec![]), None);
        std::thread::scope(|s| {
            for _ in 0..8 {
                s.spawn(|| gw.complete(&request("same")).unwrap());
            }
        });
        assert_eq!(gw.network_calls(), 1);
    }

    #[test]
    fn spec_validation() {
        assert!(BackendSpec::mock("m").validate().is_ok());
        assert!(BackendSpec::mock("").validate().is_err());
        let mut h = BackendSpec::http_chat("gpt-4-1106-preview", "http://x", "OPENAI_API_KEY");
        assert!(h.validate().is_ok());
        h.credentials_env_var = None;
        assert!(h.validate().is_err());
    }
}
