//! Per-provider request and response schemas.
//!
//! | wire        | request                                                        | scores read from                                   |
//! |-------------|----------------------------------------------------------------|----------------------------------------------------|
//! | mock        | `{"text": ..}`                                                 | flat object `{category: score}`                    |
//! | openai      | `{"input": ..}`, bearer token                                  | `results[0].category_scores`                       |
//! | perspective | `{"comment":{"text":..},"languages":["en"],"requestedAttributes":{..}}`, `X-Goog-Api-Key` | `attributeScores.<ATTR>.summaryScore.value` |
//! | azure       | raw text body, `Ocp-Apim-Subscription-Key`, `?classify=True`   | `Classification.Category{1,2,3}.Score`, `Terms`    |
//! | google      | `{"document":{"type":"PLAIN_TEXT","content":..}}`, `X-Goog-Api-Key` | `moderationCategories[].confidence`           |
//! | amazon      | `{"TextSegments":[{"Text":..}],"LanguageCode":"en"}`           | `ResultList[0].Labels[].Score`, `Toxicity`         |
//!
//! Amazon Comprehend requires SigV4 request signing, which is delegated to a
//! local signing proxy at the configured endpoint; the key variable carries the
//! proxy's bearer token.
//!
//! Category names are normalized with [`category_key`] so that e.g.
//! `"harassment/threatening"` and `"HARASSMENT_THREATENING"` both become
//! `harassment_threatening`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::{json, Value};

use super::{Credentials, ProviderError, ProviderResponse, ProviderSpec, WireFormat};

/// A fully built HTTP request. Secret headers are kept apart so they never
/// reach logs: `Debug` and [`WireRequest::loggable`] redact them.
#[derive(Clone, PartialEq, Eq)]
pub struct WireRequest {
    pub provider_id: String,
    pub method: &'static str,
    pub url: String,
    pub headers: Vec<(String, String)>,
    pub secret_headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl WireRequest {
    /// One-line description safe for logs.
    pub fn loggable(&self) -> String {
        let mut s = format!("{} {} ({} bytes)", self.method, self.url, self.body.len());
        for (k, v) in &self.headers {
            s.push_str(&format!(" {k}: {v};"));
        }
        for (k, _) in &self.secret_headers {
            s.push_str(&format!(" {k}: <redacted>;"));
        }
        s
    }

    /// Header iterator including secrets, for transports only.
    pub fn all_headers(&self) -> impl Iterator<Item = (&str, &str)> {
        self.headers
            .iter()
            .chain(&self.secret_headers)
            .map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Text carried by a mock request, if any.
    pub fn mock_text(&self) -> Option<String> {
        let v: Value = serde_json::from_slice(&self.body).ok()?;
        v.get("text")?.as_str().map(str::to_string)
    }
}

impl fmt::Debug for WireRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.loggable())
    }
}

/// Lowercase, with every run of non-alphanumeric characters turned into `_`.
pub fn category_key(name: &str) -> String {
    name.split(|c: char| !c.is_alphanumeric())
        .filter(|p| !p.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join("_")
}

fn perspective_attribute(category: &str) -> String {
    category.to_uppercase()
}

/// Builds the provider request for `text`. Output bytes are deterministic
/// for a fixed spec and text.
pub fn encode_request(
    spec: &ProviderSpec,
    text: &str,
    creds: &dyn Credentials,
) -> Result<WireRequest, ProviderError> {
    if let Some(limit) = spec.max_text_chars {
        let actual = text.chars().count();
        if actual > limit {
            return Err(ProviderError::TextTooLong { actual, limit });
        }
    }
    let key = match &spec.auth_env_var {
        Some(var) => Some(
            creds
                .get(var)
                .ok_or_else(|| ProviderError::MissingCredential(var.clone()))?,
        ),
        None => None,
    };
    let json_header = || vec![("Content-Type".to_string(), "application/json".to_string())];
    let secret = |name: &str, prefix: &str| -> Vec<(String, String)> {
        key.iter()
            .map(|k| (name.to_string(), format!("{prefix}{k}")))
            .collect()
    };
    let to_bytes = |v: Value| serde_json::to_vec(&v).expect("json values serialize");

    let (url, headers, secret_headers, body) = match spec.wire {
        WireFormat::Mock => (
            spec.endpoint.clone(),
            json_header(),
            secret("Authorization", "Bearer "),
            to_bytes(json!({ "text": text })),
        ),
        WireFormat::OpenAi => (
            spec.endpoint.clone(),
            json_header(),
            secret("Authorization", "Bearer "),
            to_bytes(json!({ "input": text })),
        ),
        WireFormat::Perspective => {
            let attrs: serde_json::Map<String, Value> = spec
                .categories
                .iter()
                .map(|c| (perspective_attribute(c), json!({})))
                .collect();
            (
                spec.endpoint.clone(),
                json_header(),
                secret("X-Goog-Api-Key", ""),
                to_bytes(json!({
                    "comment": { "text": text },
                    "languages": ["en"],
                    "requestedAttributes": attrs,
                })),
            )
        }
        WireFormat::Azure => (
            format!("{}?classify=True&language=eng", spec.endpoint),
            vec![("Content-Type".to_string(), "text/plain".to_string())],
            secret("Ocp-Apim-Subscription-Key", ""),
            text.as_bytes().to_vec(),
        ),
        WireFormat::Google => (
            spec.endpoint.clone(),
            json_header(),
            secret("X-Goog-Api-Key", ""),
            to_bytes(json!({ "document": { "type": "PLAIN_TEXT", "content": text } })),
        ),
        WireFormat::Amazon => {
            let mut headers = json_header();
            headers.push((
                "X-Amz-Target".to_string(),
                "Comprehend_20171127.DetectToxicContent".to_string(),
            ));
            (
                spec.endpoint.clone(),
                headers,
                secret("Authorization", "Bearer "),
                to_bytes(json!({ "TextSegments": [{ "Text": text }], "LanguageCode": "en" })),
            )
        }
    };
    Ok(WireRequest {
        provider_id: spec.id.clone(),
        method: "POST",
        url,
        headers,
        secret_headers,
        body,
    })
}

fn malformed(detail: impl Into<String>) -> ProviderError {
    ProviderError::MalformedResponse(detail.into())
}

fn number(v: &Value, what: &str) -> Result<f64, ProviderError> {
    v.as_f64()
        .ok_or_else(|| malformed(format!("{what}: expected a number, got {v}")))
}

/// Parses a provider response body. The returned response carries empty
/// request context; see [`ProviderResponse::stamped`].
pub fn decode_response(spec: &ProviderSpec, body: &[u8]) -> Result<ProviderResponse, ProviderError> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(malformed("empty body"));
    }
    let root: Value =
        serde_json::from_slice(body).map_err(|e| malformed(format!("invalid JSON: {e}")))?;
    let mut raw: Vec<(String, f64)> = Vec::new();
    let mut model_version = None;

    match spec.wire {
        WireFormat::Mock => {
            let obj = root.as_object().ok_or_else(|| malformed("expected an object"))?;
            for (k, v) in obj {
                raw.push((k.clone(), number(v, k)?));
            }
        }
        WireFormat::OpenAi => {
            model_version = root.get("model").and_then(Value::as_str).map(str::to_string);
            let scores = root
                .pointer("/results/0/category_scores")
                .and_then(Value::as_object)
                .ok_or_else(|| malformed("missing results[0].category_scores"))?;
            for (k, v) in scores {
                raw.push((k.clone(), number(v, k)?));
            }
        }
        WireFormat::Perspective => {
            let attrs = root
                .get("attributeScores")
                .and_then(Value::as_object)
                .ok_or_else(|| malformed("missing attributeScores"))?;
            for (k, v) in attrs {
                let score = v
                    .pointer("/summaryScore/value")
                    .ok_or_else(|| malformed(format!("{k}: missing summaryScore.value")))?;
                raw.push((k.clone(), number(score, k)?));
            }
        }
        WireFormat::Azure => {
            let class = root
                .get("Classification")
                .and_then(Value::as_object)
                .ok_or_else(|| malformed("missing Classification"))?;
            for (field, name) in [
                ("Category1", "sexually_explicit"),
                ("Category2", "sexually_suggestive"),
                ("Category3", "offensive"),
            ] {
                if let Some(cat) = class.get(field) {
                    let score = cat
                        .get("Score")
                        .ok_or_else(|| malformed(format!("{field}: missing Score")))?;
                    raw.push((name.to_string(), number(score, field)?));
                }
            }
            // Profanity is a term match list, reported as a 0/1 indicator.
            let hit = match root.get("Terms") {
                Some(Value::Array(terms)) => !terms.is_empty(),
                _ => false,
            };
            raw.push(("profanity".to_string(), if hit { 1.0 } else { 0.0 }));
        }
        WireFormat::Google => {
            let cats = root
                .get("moderationCategories")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("missing moderationCategories"))?;
            for c in cats {
                let name = c
                    .get("name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed("category without name"))?;
                let conf = c
                    .get("confidence")
                    .ok_or_else(|| malformed(format!("{name}: missing confidence")))?;
                raw.push((name.to_string(), number(conf, name)?));
            }
        }
        WireFormat::Amazon => {
            let result = root
                .pointer("/ResultList/0")
                .ok_or_else(|| malformed("missing ResultList[0]"))?;
            if let Some(t) = result.get("Toxicity") {
                raw.push(("toxicity".to_string(), number(t, "Toxicity")?));
            }
            let labels = result
                .get("Labels")
                .and_then(Value::as_array)
                .ok_or_else(|| malformed("missing Labels"))?;
            for l in labels {
                let name = l
                    .get("Name")
                    .and_then(Value::as_str)
                    .ok_or_else(|| malformed("label without Name"))?;
                let score = l
                    .get("Score")
                    .ok_or_else(|| malformed(format!("{name}: missing Score")))?;
                raw.push((name.to_string(), number(score, name)?));
            }
        }
    }

    let mut category_scores = BTreeMap::new();
    for (name, value) in raw {
        let key = category_key(&name);
        if !(0.0..=1.0).contains(&value) {
            return Err(ProviderError::ScoreOutOfRange {
                category: key,
                value,
            });
        }
        // Categories the spec does not advertise are dropped.
        if spec.has_category(&key) {
            category_scores.insert(key, value);
        }
    }
    let absent_categories: BTreeSet<String> = spec
        .categories
        .iter()
        .filter(|c| !category_scores.contains_key(*c))
        .cloned()
        .collect();
    Ok(ProviderResponse {
        provider_id: spec.id.clone(),
        text_digest: String::new(),
        category_scores,
        absent_categories,
        latency_ms: 0.0,
        retrieved_at_ms: 0,
        model_version,
    })
}
