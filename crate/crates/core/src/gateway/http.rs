use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendSpec, CompletionRequest, GatewayError, Transport};

/// OpenAI-style chat-completions client.
///
/// Request body: `{model, messages: [{role: "user", content}], temperature,
/// max_tokens}`. The reply text is `choices[0].message.content`.
pub struct HttpChatTransport {
    endpoint: String,
    api_key: String,
    http: reqwest::blocking::Client,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatReply,
}

#[derive(Deserialize)]
struct ChatReply {
    content: Option<String>,
}

impl HttpChatTransport {
    /// Reads the API key from the environment variable named in `spec`.
    pub fn from_spec(spec: &BackendSpec) -> Result<Self, GatewayError> {
        let endpoint = spec
            .endpoint_url
            .clone()
            .ok_or_else(|| GatewayError::InvalidRequest("http_chat backend without endpoint_url".into()))?;
        let var = spec
            .credentials_env_var
            .as_deref()
            .ok_or_else(|| GatewayError::AuthError("no credentials_env_var configured".into()))?;
        let api_key = std::env::var(var).map_err(|_| {
            GatewayError::AuthError(format!(
                "environment variable {var} is not set; export it with the API key for {}",
                spec.model_id
            ))
        })?;
        Ok(HttpChatTransport::new(
            endpoint,
            api_key,
            Duration::from_secs(spec.timeout_secs),
        ))
    }

    pub fn new(endpoint: String, api_key: String, timeout: Duration) -> Self {
        let http = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .expect("http client builds");
        HttpChatTransport {
            endpoint,
            api_key,
            http,
        }
    }
}

impl Transport for HttpChatTransport {
    fn send(&self, model_id: &str, request: &CompletionRequest) -> Result<String, GatewayError> {
        let body = ChatRequest {
            model: model_id,
            messages: [ChatMessage {
                role: "user",
                content: &request.prompt,
            }],
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let response = self
            .http
            .post(&self.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| GatewayError::Transient(e.to_string()))?;
        let status = response.status();
        let text = response.text().map_err(|e| GatewayError::Transient(e.to_string()))?;
        match status.as_u16() {
            200..=299 => {}
            401 | 403 => return Err(GatewayError::AuthError(format!("HTTP {status}: {text}"))),
            408 | 429 | 500..=599 => return Err(GatewayError::Transient(format!("HTTP {status}"))),
            _ => return Err(GatewayError::InvalidResponse(format!("HTTP {status}: {text}"))),
        }
        let parsed: ChatResponse =
            serde_json::from_str(&text).map_err(|e| GatewayError::InvalidResponse(e.to_string()))?;
        parsed
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .ok_or_else(|| GatewayError::InvalidResponse("response has no choices".into()))
    }
}
