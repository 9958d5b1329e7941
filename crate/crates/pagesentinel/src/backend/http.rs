//! Chat-completion backend over HTTP.
//!
//! The wire protocol is the ubiquitous chat-completions shape: POST a JSON
//! body with `model`, `messages`, and `temperature`; read the reply from
//! `choices[0].message.content`. Everything network-flavored lives behind
//! the [`Transport`] trait so retry, backoff, and concurrency-limiting
//! logic can be tested without sockets.

use super::{Backend, BackendConfig, BackendError};
use serde::Deserialize;
use serde_json::json;
use std::sync::{Condvar, Mutex};
use std::time::Duration;
use thiserror::Error;

/// A raw HTTP result: status code plus body text.
#[derive(Debug, Clone)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("connection failed: {message}")]
    Connect { message: String },
}

/// One POST of a JSON body, authenticated with an optional bearer token.
pub trait Transport: Send + Sync {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError>;
}

impl<T: Transport + ?Sized> Transport for std::sync::Arc<T> {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        (**self).post_json(url, bearer, body, timeout)
    }
}

/// Production transport backed by a blocking reqwest client.
pub struct ReqwestTransport {
    client: reqwest::blocking::Client,
}

impl ReqwestTransport {
    pub fn new() -> Self {
        ReqwestTransport {
            client: reqwest::blocking::Client::new(),
        }
    }
}

impl Default for ReqwestTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for ReqwestTransport {
    fn post_json(
        &self,
        url: &str,
        bearer: Option<&str>,
        body: &serde_json::Value,
        timeout: Duration,
    ) -> Result<HttpResponse, TransportError> {
        let mut request = self.client.post(url).json(body).timeout(timeout);
        if let Some(token) = bearer {
            request = request.bearer_auth(token);
        }
        match request.send() {
            Ok(response) => {
                let status = response.status().as_u16();
                let body = response.text().unwrap_or_default();
                Ok(HttpResponse { status, body })
            }
            Err(err) if err.is_timeout() => Err(TransportError::Timeout),
            Err(err) => Err(TransportError::Connect {
                message: err.to_string(),
            }),
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    permits: Mutex<usize>,
    released: Condvar,
}

impl Gate {
    fn new(max: usize) -> Self {
        Gate {
            permits: Mutex::new(max),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> GatePermit<'_> {
        let mut permits = self.permits.lock().expect("gate lock");
        while *permits == 0 {
            permits = self.released.wait(permits).expect("gate wait");
        }
        *permits -= 1;
        GatePermit { gate: self }
    }
}

struct GatePermit<'a> {
    gate: &'a Gate,
}

impl Drop for GatePermit<'_> {
    fn drop(&mut self) {
        *self.gate.permits.lock().expect("gate lock") += 1;
        self.gate.released.notify_one();
    }
}

pub struct HttpBackend {
    config: BackendConfig,
    transport: Box<dyn Transport>,
    gate: Gate,
    backoff_base: Duration,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, super::ConfigError> {
        Self::with_transport(config, Box::new(ReqwestTransport::new()))
    }

    /// Build with a custom transport (how the tests drive this type).
    pub fn with_transport(
        config: BackendConfig,
        transport: Box<dyn Transport>,
    ) -> Result<Self, super::ConfigError> {
        config.validate()?;
        let gate = Gate::new(config.max_concurrent);
        Ok(HttpBackend {
            config,
            transport,
            gate,
            backoff_base: Duration::from_millis(200),
        })
    }

    /// Override the base retry delay (tests use zero).
    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    /// The bearer token, if the configured environment variable is set and
    /// non-empty. Absent key means the request goes out unauthenticated —
    /// correct for local inference servers.
    fn bearer(&self) -> Option<String> {
        std::env::var(&self.config.api_key_env)
            .ok()
            .filter(|token| !token.is_empty())
    }
}

/// Retry on timeouts, connection failures, 429, and 5xx; anything else is
/// a terminal protocol-level answer.
fn transient(status: u16) -> bool {
    status == 429 || (500..=599).contains(&status)
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

fn parse_chat_reply(body: &str) -> Result<String, BackendError> {
    let reply: ChatReply =
        serde_json::from_str(body).map_err(|err| BackendError::MalformedReply {
            message: format!("reply is not a chat completion: {err}"),
        })?;
    reply
        .choices
        .into_iter()
        .next()
        .map(|choice| choice.message.content)
        .ok_or_else(|| BackendError::MalformedReply {
            message: "reply contains no choices".to_string(),
        })
}

impl Backend for HttpBackend {
    fn complete(&self, system: &str, user: &str) -> Result<String, BackendError> {
        let _permit = self.gate.acquire();
        let body = json!({
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.config.temperature,
        });
        let bearer = self.bearer();
        let timeout = Duration::from_secs(self.config.timeout_secs);
        let mut delay = self.backoff_base;
        let mut attempts = 0;
        loop {
            attempts += 1;
            let outcome =
                self.transport
                    .post_json(&self.config.endpoint, bearer.as_deref(), &body, timeout);
            let retryable = match &outcome {
                Ok(response) => transient(response.status),
                Err(_) => true,
            };
            if retryable && attempts <= self.config.retries {
                log::warn!(
                    "backend attempt {attempts} failed ({}), retrying in {delay:?}",
                    describe(&outcome)
                );
                std::thread::sleep(delay);
                delay *= 2;
                continue;
            }
            return match outcome {
                Ok(response) if (200..300).contains(&response.status) => {
                    parse_chat_reply(&response.body)
                }
                Ok(response) => Err(BackendError::Http {
                    status: response.status,
                }),
                Err(err) => Err(BackendError::Transport {
                    message: err.to_string(),
                    attempts,
                }),
            };
        }
    }

    fn name(&self) -> &'static str {
        "http"
    }
}

fn describe(outcome: &Result<HttpResponse, TransportError>) -> String {
    match outcome {
        Ok(response) => format!("status {}", response.status),
        Err(err) => err.to_string(),
    }
}
