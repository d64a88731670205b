//! HTTP clients for the common embeddings and chat-completions JSON wire
//! shapes, with exponential-backoff retries on transient failures.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::BackendError;

use super::{ChatBackend, EmbeddingBackend};

/// Connection settings, normally read from the environment:
/// `HELA_MEM_BASE_URL`, `HELA_MEM_API_KEY`, `HELA_MEM_EMBED_MODEL`,
/// `HELA_MEM_CHAT_MODEL`.
#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub embed_model: String,
    pub chat_model: String,
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub timeout_secs: u64,
}

impl HttpBackendConfig {
    pub fn from_env() -> Result<Self, BackendError> {
        let base_url = std::env::var("HELA_MEM_BASE_URL").map_err(|_| {
            BackendError::Config("HELA_MEM_BASE_URL is not set".to_string())
        })?;
        Ok(HttpBackendConfig {
            base_url,
            api_key: std::env::var("HELA_MEM_API_KEY").ok(),
            embed_model: std::env::var("HELA_MEM_EMBED_MODEL")
                .unwrap_or_else(|_| "text-embedding-3-small".to_string()),
            chat_model: std::env::var("HELA_MEM_CHAT_MODEL")
                .unwrap_or_else(|_| "gpt-4o-mini".to_string()),
            max_attempts: 3,
            backoff_ms: 250,
            timeout_secs: 60,
        })
    }

    fn endpoint(&self, path: &str) -> String {
        format!("{}/{}", self.base_url.trim_end_matches('/'), path)
    }

    fn client(&self) -> Result<reqwest::blocking::Client, BackendError> {
        reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(self.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))
    }
}

#[derive(Serialize)]
struct EmbeddingsRequest<'a> {
    model: &'a str,
    input: [&'a str; 1],
}

#[derive(Deserialize)]
struct EmbeddingsResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    temperature: f64,
    messages: Vec<ChatMessage<'a>>,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatChoiceMessage,
}

#[derive(Deserialize)]
struct ChatChoiceMessage {
    content: String,
}

/// Embeddings client.
pub struct HttpEmbedding {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpEmbedding {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = config.client()?;
        Ok(HttpEmbedding { config, client })
    }
}

impl EmbeddingBackend for HttpEmbedding {
    fn embed(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        if text.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let body = EmbeddingsRequest { model: &self.config.embed_model, input: [text] };
        with_retries(self.config.max_attempts, self.config.backoff_ms, || {
            let response: EmbeddingsResponse = post_json(
                &self.client,
                &self.config.endpoint("embeddings"),
                self.config.api_key.as_deref(),
                &body,
            )?;
            response
                .data
                .into_iter()
                .next()
                .map(|d| d.embedding)
                .ok_or_else(|| BackendError::MalformedResponse("empty data array".to_string()))
        })
    }
}

/// Chat-completions client. Requests use temperature 0.
pub struct HttpChat {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
}

impl HttpChat {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        let client = config.client()?;
        Ok(HttpChat { config, client })
    }
}

impl ChatBackend for HttpChat {
    fn chat(&self, system_prompt: &str, user_prompt: &str) -> Result<String, BackendError> {
        if system_prompt.trim().is_empty() || user_prompt.trim().is_empty() {
            return Err(BackendError::EmptyInput);
        }
        let body = ChatRequest {
            model: &self.config.chat_model,
            temperature: 0.0,
            messages: vec![
                ChatMessage { role: "system", content: system_prompt },
                ChatMessage { role: "user", content: user_prompt },
            ],
        };
        with_retries(self.config.max_attempts, self.config.backoff_ms, || {
            let response: ChatResponse = post_json(
                &self.client,
                &self.config.endpoint("chat/completions"),
                self.config.api_key.as_deref(),
                &body,
            )?;
            response
                .choices
                .into_iter()
                .next()
                .map(|c| c.message.content)
                .ok_or_else(|| BackendError::MalformedResponse("empty choices array".to_string()))
        })
    }
}

fn post_json<B: Serialize, R: for<'de> Deserialize<'de>>(
    client: &reqwest::blocking::Client,
    url: &str,
    api_key: Option<&str>,
    body: &B,
) -> Result<R, BackendError> {
    let mut request = client.post(url).json(body);
    if let Some(key) = api_key {
        request = request.bearer_auth(key);
    }
    let response = request
        .send()
        .map_err(|e| BackendError::Transport(e.to_string()))?;
    let status = response.status().as_u16();
    let text = response
        .text()
        .map_err(|e| BackendError::Transport(e.to_string()))?;
    if !(200..300).contains(&status) {
        return Err(status_error(status, text));
    }
    serde_json::from_str(&text).map_err(|e| BackendError::MalformedResponse(e.to_string()))
}

fn status_error(status: u16, body: String) -> BackendError {
    let message = body.chars().take(400).collect();
    match status {
        429 => BackendError::RateLimited { status, message },
        500..=599 => BackendError::Server { status, message },
        _ => BackendError::Rejected { status, message },
    }
}

fn with_retries<T>(
    max_attempts: u32,
    backoff_ms: u64,
    call: impl Fn() -> Result<T, BackendError>,
) -> Result<T, BackendError> {
    let mut attempt = 0;
    loop {
        match call() {
            Ok(value) => return Ok(value),
            Err(err) if err.is_retryable() && attempt + 1 < max_attempts => {
                log::debug!("backend attempt {} failed, retrying: {err}", attempt + 1);
                std::thread::sleep(Duration::from_millis(backoff_ms << attempt));
                attempt += 1;
            }
            Err(err) => return Err(err),
        }
    }
}
