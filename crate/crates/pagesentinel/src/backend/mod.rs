//! Model backends: the side-effect boundary of the pipeline.
//!
//! Everything that talks to a model goes through [`Backend::complete`].
//! Three implementations:
//!
//! * [`MockBackend`] — a deterministic rule oracle for offline tests,
//! * [`HttpBackend`] — a chat-completion HTTP client with retry and a
//!   concurrency bound,
//! * cassette wrappers that record live transcripts and replay them later.

mod cassette;
mod http;
mod mock;

pub use cassette::{request_fingerprint, CassetteRecorder, CassetteReplayer};
pub use http::{HttpBackend, HttpResponse, ReqwestTransport, Transport, TransportError};
pub use mock::{mock_extract_popups, MockBackend, MockRules, COERCIVE_LEXICON, SENSITIVE_FIELDS};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Environment variable consulted for the bearer token by default.
pub const DEFAULT_API_KEY_ENV: &str = "SENTINEL_API_KEY";

/// A chat-completion backend. `system` carries the rendered prompt
/// template; `user` is the short fixed turn that asks for the answer.
pub trait Backend: Send + Sync {
    fn complete(&self, system: &str, user: &str) -> Result<String, BackendError>;

    /// Short label for logs and reports ("mock", "http", "replay", ...).
    fn name(&self) -> &'static str;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&self, system: &str, user: &str) -> Result<String, BackendError> {
        (**self).complete(system, user)
    }

    fn name(&self) -> &'static str {
        (**self).name()
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    /// Network-level failure that persisted through all retries.
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { message: String, attempts: u32 },
    /// Service answered with a non-success status that retrying cannot fix.
    #[error("backend returned HTTP status {status}")]
    Http { status: u16 },
    /// The HTTP reply did not carry a chat completion where expected.
    #[error("malformed backend reply: {message}")]
    MalformedReply { message: String },
    /// Replay cassette has no entry for this request.
    #[error("no cassette entry for request fingerprint {fingerprint}")]
    CassetteMiss { fingerprint: String },
    /// The backend cannot serve this request shape at all.
    #[error("backend cannot serve this request: {message}")]
    Unsupported { message: String },
    #[error("cassette I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Connection settings for [`HttpBackend`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BackendConfig {
    pub endpoint: String,
    pub model_name: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_concurrent")]
    pub max_concurrent: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default = "default_api_key_env")]
    pub api_key_env: String,
}

fn default_max_concurrent() -> usize {
    4
}

fn default_timeout_secs() -> u64 {
    30
}

fn default_retries() -> u32 {
    2
}

fn default_api_key_env() -> String {
    DEFAULT_API_KEY_ENV.to_string()
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            endpoint: String::new(),
            model_name: String::new(),
            temperature: 0.0,
            max_concurrent: default_max_concurrent(),
            timeout_secs: default_timeout_secs(),
            retries: default_retries(),
            api_key_env: default_api_key_env(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("backend endpoint must not be empty")]
    EmptyEndpoint,
    #[error("backend model_name must not be empty")]
    EmptyModel,
    #[error("max_concurrent must be at least 1")]
    ZeroConcurrency,
    #[error("temperature must be a non-negative finite number, got {0}")]
    BadTemperature(f64),
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.endpoint.is_empty() {
            return Err(ConfigError::EmptyEndpoint);
        }
        if self.model_name.is_empty() {
            return Err(ConfigError::EmptyModel);
        }
        if self.max_concurrent == 0 {
            return Err(ConfigError::ZeroConcurrency);
        }
        if !self.temperature.is_finite() || self.temperature < 0.0 {
            return Err(ConfigError::BadTemperature(self.temperature));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults() {
        let cfg: BackendConfig =
            serde_json::from_str(r#"{"endpoint":"http://localhost:1","model_name":"m"}"#).unwrap();
        assert_eq!(cfg.temperature, 0.0);
        assert_eq!(cfg.max_concurrent, 4);
        assert_eq!(cfg.timeout_secs, 30);
        assert_eq!(cfg.retries, 2);
        assert_eq!(cfg.api_key_env, "SENTINEL_API_KEY");
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = BackendConfig {
            endpoint: "http://localhost:1".into(),
            model_name: "m".into(),
            ..BackendConfig::default()
        };
        cfg.max_concurrent = 0;
        assert!(matches!(cfg.validate(), Err(ConfigError::ZeroConcurrency)));
        cfg.max_concurrent = 1;
        cfg.temperature = -0.5;
        assert!(matches!(cfg.validate(), Err(ConfigError::BadTemperature(_))));
        cfg.temperature = 0.0;
        cfg.endpoint = String::new();
        assert!(matches!(cfg.validate(), Err(ConfigError::EmptyEndpoint)));
    }
}
