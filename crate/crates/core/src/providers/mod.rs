//! Adapters over moderation classifiers.
//!
//! Every provider is described by a [`ProviderSpec`]. Requests are built by
//! [`encode_request`] and responses parsed by [`decode_response`] into a
//! [`ProviderResponse`] holding raw per-category confidences. Those are turned
//! into a scalar [`Verdict`] by [`to_verdict`] using a [`CategoryMapping`].
//!
//! The [`mock`] submodule provides an offline lexicon classifier used by tests
//! and the `--mock` mode of the CLI.

pub mod mock;
mod verdict;
mod wire;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::{mock_score, MockLexicon, MockTransport};
pub use verdict::{to_verdict, CategoryMapping, Combiner, Verdict, DEFAULT_THRESHOLD};
pub use wire::{category_key, decode_response, encode_request, WireRequest};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("text has {actual} characters, provider limit is {limit}")]
    TextTooLong { actual: usize, limit: usize },
    #[error("missing credential: set environment variable {0}")]
    MissingCredential(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("score for `{category}` out of range: {value}")]
    ScoreOutOfRange { category: String, value: f64 },
    #[error("category `{0}` missing from response")]
    MissingCategory(String),
    #[error("unknown provider `{0}`")]
    UnknownProvider(String),
    #[error("invalid provider spec `{id}`: {detail}")]
    InvalidSpec { id: String, detail: String },
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
}

/// Wire protocol spoken by a provider.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WireFormat {
    OpenAi,
    Perspective,
    Azure,
    Google,
    Amazon,
    Mock,
}

/// Static description of one moderation service.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub id: String,
    pub display_name: String,
    pub wire: WireFormat,
    /// Base URL of the scoring endpoint.
    pub endpoint: String,
    /// Queries per second.
    pub rate_limit: f64,
    #[serde(default)]
    pub max_text_chars: Option<usize>,
    /// Normalized category names (see [`category_key`]).
    pub categories: Vec<String>,
    /// Environment variable holding the API key; `None` for keyless providers.
    #[serde(default)]
    pub auth_env_var: Option<String>,
    /// Free-form transparency metadata (developer, cost, versions).
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl ProviderSpec {
    pub fn validate(&self) -> Result<(), ProviderError> {
        let invalid = |detail: &str| ProviderError::InvalidSpec {
            id: self.id.clone(),
            detail: detail.to_string(),
        };
        if !(self.rate_limit.is_finite() && self.rate_limit > 0.0) {
            return Err(invalid("rate_limit must be a positive number"));
        }
        if self.categories.is_empty() {
            return Err(invalid("categories must not be empty"));
        }
        let unique: BTreeSet<_> = self.categories.iter().collect();
        if unique.len() != self.categories.len() {
            return Err(invalid("duplicate category names"));
        }
        if self.max_text_chars == Some(0) {
            return Err(invalid("max_text_chars must be positive"));
        }
        Ok(())
    }

    pub fn has_category(&self, name: &str) -> bool {
        self.categories.iter().any(|c| c == name)
    }

    /// Conventional credential variable, `MODAUDIT_<ID>_KEY`.
    pub fn default_env_var(id: &str) -> String {
        format!("MODAUDIT_{}_KEY", id.to_uppercase().replace('-', "_"))
    }

    /// The offline lexicon classifier.
    pub fn mock() -> Self {
        ProviderSpec {
            id: "mock".into(),
            display_name: "Offline lexicon mock".into(),
            wire: WireFormat::Mock,
            endpoint: "mock://score".into(),
            rate_limit: 10_000.0,
            max_text_chars: None,
            categories: vec!["toxicity".into()],
            auth_env_var: None,
            metadata: BTreeMap::new(),
        }
    }
}

fn meta(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect()
}

fn cats(names: &[&str]) -> Vec<String> {
    names.iter().map(|c| c.to_string()).collect()
}

/// Known providers keyed by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderRegistry {
    #[serde(rename = "provider")]
    specs: Vec<ProviderSpec>,
}

impl ProviderRegistry {
    /// The five commercial services plus the mock, with published rate limits.
    pub fn builtin() -> Self {
        let specs = vec![
            ProviderSpec {
                id: "openai".into(),
                display_name: "OpenAI Moderation Endpoint".into(),
                wire: WireFormat::OpenAi,
                endpoint: "https://api.openai.com/v1/moderations".into(),
                rate_limit: 25.0,
                max_text_chars: Some(2000),
                categories: cats(&[
                    "harassment",
                    "harassment_threatening",
                    "hate",
                    "hate_threatening",
                    "self_harm",
                    "self_harm_instructions",
                    "self_harm_intent",
                    "sexual",
                    "sexual_minors",
                    "violence",
                    "violence_graphic",
                ]),
                auth_env_var: Some(ProviderSpec::default_env_var("openai")),
                metadata: meta(&[
                    ("developer", "OpenAI"),
                    ("cost", "free"),
                    ("model_date", "2023-08-28"),
                    ("api_version", "v2"),
                ]),
            },
            ProviderSpec {
                id: "perspective".into(),
                display_name: "Perspective API".into(),
                wire: WireFormat::Perspective,
                endpoint: "https://commentanalyzer.googleapis.com/v1alpha1/comments:analyze".into(),
                rate_limit: 1.0,
                max_text_chars: None,
                categories: cats(&[
                    "threat",
                    "insult",
                    "toxicity",
                    "identity_attack",
                    "severe_toxicity",
                    "profanity",
                ]),
                auth_env_var: Some(ProviderSpec::default_env_var("perspective")),
                metadata: meta(&[
                    ("developer", "Jigsaw (Google)"),
                    ("cost", "free"),
                    ("api_version", "v1alpha1"),
                ]),
            },
            ProviderSpec {
                id: "azure".into(),
                display_name: "Azure Content Moderator".into(),
                wire: WireFormat::Azure,
                endpoint: "https://westus.api.cognitive.microsoft.com/contentmoderator/moderate/v1.0/ProcessText/Screen".into(),
                rate_limit: 1.0,
                max_text_chars: Some(1024),
                categories: cats(&[
                    "sexually_explicit",
                    "sexually_suggestive",
                    "offensive",
                    "profanity",
                ]),
                auth_env_var: Some(ProviderSpec::default_env_var("azure")),
                metadata: meta(&[
                    ("developer", "Microsoft"),
                    ("cost", "$0.40 per 1000 calls"),
                    ("api_version", "v1.0"),
                    ("rate_limit_note", "free tier 1 q/s, commercial 10 q/s"),
                ]),
            },
            ProviderSpec {
                id: "google".into(),
                display_name: "Google Natural Language API".into(),
                wire: WireFormat::Google,
                endpoint: "https://language.googleapis.com/v1/documents:moderateText".into(),
                rate_limit: 10.0,
                max_text_chars: None,
                categories: cats(&[
                    "toxic",
                    "insult",
                    "profanity",
                    "derogatory",
                    "sexual",
                    "death_harm_tragedy",
                    "violent",
                    "firearms_weapons",
                    "public_safety",
                    "health",
                    "religion_belief",
                    "illicit_drugs",
                    "war_conflict",
                    "politics",
                    "finance",
                    "legal",
                ]),
                auth_env_var: Some(ProviderSpec::default_env_var("google")),
                metadata: meta(&[
                    ("developer", "Google Cloud"),
                    ("cost", "$0.0005 per 100 characters"),
                    ("model_date", "2023-03-01"),
                    ("api_version", "text-moderation-001"),
                ]),
            },
            ProviderSpec {
                id: "amazon".into(),
                display_name: "Amazon Comprehend".into(),
                wire: WireFormat::Amazon,
                // Requests go through a SigV4 signing proxy; see wire docs.
                endpoint: "http://127.0.0.1:8787/comprehend".into(),
                rate_limit: 20.0,
                max_text_chars: Some(1024),
                categories: cats(&[
                    "toxicity",
                    "profanity",
                    "hate_speech",
                    "insult",
                    "graphic",
                    "harassment_or_abuse",
                    "sexual",
                    "violence_or_threat",
                ]),
                auth_env_var: Some(ProviderSpec::default_env_var("amazon")),
                metadata: meta(&[
                    ("developer", "AWS"),
                    ("cost", "$0.0001 per 100 characters"),
                    ("model_type", "Multilingual BERT-based models"),
                ]),
            },
            ProviderSpec::mock(),
        ];
        Self { specs }
    }

    /// Parses a TOML registry made of `[[provider]]` tables.
    pub fn from_toml_str(src: &str) -> Result<Self, ProviderError> {
        let reg: ProviderRegistry = toml::from_str(src).map_err(|e| ProviderError::InvalidSpec {
            id: "<registry>".into(),
            detail: e.to_string(),
        })?;
        let mut seen = BTreeSet::new();
        for spec in &reg.specs {
            spec.validate()?;
            if !seen.insert(spec.id.as_str()) {
                return Err(ProviderError::InvalidSpec {
                    id: spec.id.clone(),
                    detail: "duplicate provider id".into(),
                });
            }
        }
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let src = std::fs::read_to_string(path).map_err(|e| ProviderError::InvalidSpec {
            id: "<registry>".into(),
            detail: format!("{}: {e}", path.display()),
        })?;
        Self::from_toml_str(&src)
    }

    pub fn get(&self, id: &str) -> Result<&ProviderSpec, ProviderError> {
        self.specs
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| ProviderError::UnknownProvider(id.to_string()))
    }

    /// Replaces or adds a spec.
    pub fn insert(&mut self, spec: ProviderSpec) {
        match self.specs.iter_mut().find(|s| s.id == spec.id) {
            Some(slot) => *slot = spec,
            None => self.specs.push(spec),
        }
    }

    pub fn specs(&self) -> &[ProviderSpec] {
        &self.specs
    }
}

/// Raw per-category scores returned by one classifier for one text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderResponse {
    pub provider_id: String,
    /// SHA-256 of the queried text.
    pub text_digest: String,
    pub category_scores: BTreeMap<String, f64>,
    /// Advertised categories the provider did not return.
    #[serde(default)]
    pub absent_categories: BTreeSet<String>,
    pub latency_ms: f64,
    /// Unix epoch milliseconds.
    pub retrieved_at_ms: u64,
    /// Model or API version reported by the provider, verbatim.
    #[serde(default)]
    pub model_version: Option<String>,
}

impl ProviderResponse {
    /// Attaches request context to a freshly decoded response.
    pub fn stamped(mut self, text: &str, latency_ms: f64, retrieved_at_ms: u64) -> Self {
        self.text_digest = crate::sha256_hex(text);
        self.latency_ms = latency_ms;
        self.retrieved_at_ms = retrieved_at_ms;
        self
    }
}

/// Source of API credentials.
pub trait Credentials {
    fn get(&self, var: &str) -> Option<String>;
}

/// Reads credentials from the process environment.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnvCredentials;

impl Credentials for EnvCredentials {
    fn get(&self, var: &str) -> Option<String> {
        std::env::var(var).ok().filter(|v| !v.is_empty())
    }
}

impl Credentials for BTreeMap<String, String> {
    fn get(&self, var: &str) -> Option<String> {
        BTreeMap::get(self, var).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_specs_valid() {
        let reg = ProviderRegistry::builtin();
        for spec in reg.specs() {
            spec.validate().unwrap();
        }
        assert_eq!(reg.get("openai").unwrap().rate_limit, 25.0);
        assert_eq!(reg.get("perspective").unwrap().rate_limit, 1.0);
        assert_eq!(reg.get("google").unwrap().rate_limit, 10.0);
        assert_eq!(reg.get("amazon").unwrap().rate_limit, 20.0);
        assert!(matches!(reg.get("nope"), Err(ProviderError::UnknownProvider(_))));
    }

    #[test]
    fn invalid_specs() {
        let mut s = ProviderSpec::mock();
        s.rate_limit = 0.0;
        assert!(s.validate().is_err());
        let mut s = ProviderSpec::mock();
        s.categories.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn registry_roundtrips_through_toml() {
        let reg = ProviderRegistry::builtin();
        let src = toml::to_string(&reg).unwrap();
        assert_eq!(ProviderRegistry::from_toml_str(&src).unwrap(), reg);
    }

    #[test]
    fn env_var_convention() {
        assert_eq!(ProviderSpec::default_env_var("openai"), "MODAUDIT_OPENAI_KEY");
    }
}
