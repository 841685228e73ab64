//! Offline lexicon classifier.
//!
//! A [`MockLexicon`] scores a text as `clamp(base + Σ weights)` where every
//! word-boundary occurrence of a lexicon entry contributes its weight. With
//! no clamping the score is exactly additive over tokens, which makes it an
//! oracle for counterfactual and Shapley tests: swapping or masking a token
//! changes the score by precisely that token's weight.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{ProviderResponse, ProviderSpec};
use crate::psa::find_occurrences;
use crate::scheduler::{Transport, TransportError, TransportResponse};
use crate::providers::WireRequest;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockLexicon {
    pub base_score: f64,
    /// Lowercase token (may contain spaces) to additive weight.
    #[serde(default)]
    pub token_weights: BTreeMap<String, f64>,
}

impl MockLexicon {
    pub fn new(base_score: f64) -> Self {
        Self {
            base_score,
            token_weights: BTreeMap::new(),
        }
    }

    pub fn with_weight(mut self, token: &str, weight: f64) -> Self {
        self.token_weights.insert(token.to_lowercase(), weight);
        self
    }

    /// Unclamped `base + Σ weights`.
    pub fn raw_score(&self, text: &str) -> f64 {
        let mut score = self.base_score;
        for (token, w) in &self.token_weights {
            let hits = find_occurrences(text, token).len();
            score += w * hits as f64;
        }
        score
    }

    pub fn score(&self, text: &str) -> f64 {
        self.raw_score(text).clamp(0.0, 1.0)
    }

    pub fn weight(&self, token: &str) -> f64 {
        self.token_weights
            .get(&token.to_lowercase())
            .copied()
            .unwrap_or(0.0)
    }
}

/// Scores `text` with the lexicon as a single-category `toxicity` response.
pub fn mock_score(lex: &MockLexicon, text: &str) -> ProviderResponse {
    ProviderResponse {
        provider_id: ProviderSpec::mock().id,
        text_digest: crate::sha256_hex(text),
        category_scores: BTreeMap::from([("toxicity".to_string(), lex.score(text))]),
        absent_categories: Default::default(),
        latency_ms: 0.0,
        retrieved_at_ms: 0,
        model_version: Some("mock-lexicon".into()),
    }
}

/// In-process transport answering mock-wire requests from a lexicon.
#[derive(Debug)]
pub struct MockTransport {
    lexicon: MockLexicon,
    calls: AtomicUsize,
}

impl MockTransport {
    pub fn new(lexicon: MockLexicon) -> Self {
        Self {
            lexicon,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn lexicon(&self) -> &MockLexicon {
        &self.lexicon
    }

    /// Number of requests served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Transport for MockTransport {
    fn send(&self, req: &WireRequest) -> Result<TransportResponse, TransportError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = req
            .mock_text()
            .ok_or_else(|| TransportError::Permanent("mock request without text".into()))?;
        let body = serde_json::to_vec(&serde_json::json!({ "toxicity": self.lexicon.score(&text) }))
            .expect("json serializes");
        Ok(TransportResponse {
            body,
            model_version: Some("mock-lexicon".into()),
        })
    }
}
