//! Tool configuration: one JSON document covering backend selection,
//! extraction selectors, pruning thresholds, and prompt overrides.
//!
//! Every field has a default, so the tool runs with no config file at all;
//! a file only needs the keys it wants to change. Command-line flags
//! override file values, which override the built-in defaults.

use crate::backend::{BackendConfig, MockRules};
use crate::extract::PatternRegistry;
use crate::prompts::{ANALYZER_TEMPLATE, EXTRACTOR_TEMPLATE};
use crate::prune::PruneThresholds;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Which model backend serves the pipeline's two LLM roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendChoice {
    /// The deterministic rule oracle; needs no network or keys.
    Mock(MockRules),
    /// A live chat-completion endpoint.
    Http(BackendConfig),
}

impl Default for BackendChoice {
    fn default() -> Self {
        BackendChoice::Mock(MockRules::default())
    }
}

/// The full configuration document.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub backend: BackendChoice,
    pub pattern_registry: PatternRegistry,
    pub prune_thresholds: PruneThresholds,
    /// Path to a file replacing the embedded extractor prompt template.
    pub extractor_template: Option<PathBuf>,
    /// Path to a file replacing the embedded analyzer prompt template.
    pub analyzer_template: Option<PathBuf>,
    /// Verbose diagnostics on standard error.
    pub trace: bool,
}

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config file {path} is not valid: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// The two system-prompt templates the pipeline renders.
#[derive(Debug, Clone)]
pub struct Templates {
    pub extractor: String,
    pub analyzer: String,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<CliConfig, ConfigFileError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigFileError::Parse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Resolves the prompt templates: override files when configured,
    /// otherwise the embedded defaults.
    pub fn templates(&self) -> Result<Templates, ConfigFileError> {
        Ok(Templates {
            extractor: read_override(&self.extractor_template, EXTRACTOR_TEMPLATE)?,
            analyzer: read_override(&self.analyzer_template, ANALYZER_TEMPLATE)?,
        })
    }
}

fn read_override(path: &Option<PathBuf>, embedded: &str) -> Result<String, ConfigFileError> {
    match path {
        Some(path) => fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
            path: path.clone(),
            source,
        }),
        None => Ok(embedded.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_config() {
        let cfg: CliConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, CliConfig::default());
        assert_eq!(cfg.backend, BackendChoice::Mock(MockRules::default()));
        assert!(!cfg.trace);
    }

    #[test]
    fn partial_documents_keep_defaults_elsewhere() {
        let cfg: CliConfig = serde_json::from_str(
            r#"{
                "backend": {"kind": "http", "endpoint": "http://localhost:9", "model_name": "m"},
                "prune_thresholds": {"dedup_keep": 3}
            }"#,
        )
        .unwrap();
        match &cfg.backend {
            BackendChoice::Http(http) => {
                assert_eq!(http.endpoint, "http://localhost:9");
                assert_eq!(http.max_concurrent, 4);
            }
            other => panic!("expected http backend, got {other:?}"),
        }
        assert_eq!(cfg.prune_thresholds.dedup_keep, 3);
        assert_eq!(
            cfg.prune_thresholds.attr_value_cap,
            PruneThresholds::default().attr_value_cap
        );
        assert_eq!(cfg.pattern_registry, PatternRegistry::default());
    }

    #[test]
    fn mock_backend_accepts_rule_overrides() {
        let cfg: CliConfig = serde_json::from_str(
            r#"{"backend": {"kind": "mock", "coercive_lexicon": ["DO IT NOW"]}}"#,
        )
        .unwrap();
        match &cfg.backend {
            BackendChoice::Mock(rules) => {
                assert_eq!(rules.coercive_lexicon, vec!["DO IT NOW".to_string()]);
                assert_eq!(rules.sensitive_fields, MockRules::default().sensitive_fields);
            }
            other => panic!("expected mock backend, got {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<CliConfig>(r#"{"paterns": {}}"#).unwrap_err();
        assert!(err.to_string().contains("paterns"), "{err}");
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = CliConfig {
            backend: BackendChoice::Http(BackendConfig {
                endpoint: "http://localhost:9".into(),
                model_name: "m".into(),
                ..BackendConfig::default()
            }),
            trace: true,
            ..CliConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: CliConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn load_reports_the_failing_path() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.json");
        let err = CliConfig::load(&missing).unwrap_err();
        assert!(err.to_string().contains("nope.json"), "{err}");

        let bad = dir.path().join("bad.json");
        fs::write(&bad, "{").unwrap();
        let err = CliConfig::load(&bad).unwrap_err();
        assert!(err.to_string().contains("bad.json"), "{err}");
    }

    #[test]
    fn templates_default_to_the_embedded_prompts() {
        let templates = CliConfig::default().templates().unwrap();
        assert_eq!(templates.extractor, EXTRACTOR_TEMPLATE);
        assert_eq!(templates.analyzer, ANALYZER_TEMPLATE);
    }

    #[test]
    fn template_overrides_are_read_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("analyzer.txt");
        fs::write(&path, "custom {segment_type} {html_segment} {webpage_html}").unwrap();
        let cfg = CliConfig {
            analyzer_template: Some(path),
            ..CliConfig::default()
        };
        let templates = cfg.templates().unwrap();
        assert!(templates.analyzer.starts_with("custom "));
        assert_eq!(templates.extractor, EXTRACTOR_TEMPLATE);

        let missing = CliConfig {
            extractor_template: Some(dir.path().join("absent.txt")),
            ..CliConfig::default()
        };
        assert!(missing.templates().is_err());
    }
}
