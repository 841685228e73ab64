use serde::{Deserialize, Serialize};

use super::{ProviderError, ProviderResponse, ProviderSpec};

/// Operating threshold used when a run does not set one.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Combiner {
    #[default]
    Max,
}

/// Which provider categories feed the scalar verdict, and how.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMapping {
    pub provider_id: String,
    pub selected_categories: Vec<String>,
    #[serde(default)]
    pub combiner: Combiner,
}

impl CategoryMapping {
    pub fn new(provider_id: impl Into<String>, categories: &[&str]) -> Self {
        Self {
            provider_id: provider_id.into(),
            selected_categories: categories.iter().map(|c| c.to_string()).collect(),
            combiner: Combiner::Max,
        }
    }

    /// Every advertised category of `spec`.
    pub fn all(spec: &ProviderSpec) -> Self {
        Self {
            provider_id: spec.id.clone(),
            selected_categories: spec.categories.clone(),
            combiner: Combiner::Max,
        }
    }

    pub fn validate(&self, spec: &ProviderSpec) -> Result<(), ProviderError> {
        if self.selected_categories.is_empty() {
            return Err(ProviderError::InvalidSpec {
                id: spec.id.clone(),
                detail: "category mapping selects no categories".into(),
            });
        }
        match self
            .selected_categories
            .iter()
            .find(|c| !spec.has_category(c))
        {
            Some(c) => Err(ProviderError::MissingCategory(c.clone())),
            None => Ok(()),
        }
    }
}

/// Scalar moderation decision. `is_flagged` holds iff `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub score: f64,
    pub threshold: f64,
    pub is_flagged: bool,
}

impl Verdict {
    pub fn new(score: f64, threshold: f64) -> Self {
        Self {
            score,
            threshold,
            is_flagged: score >= threshold,
        }
    }
}

/// Combines the selected category scores (max) and applies the threshold.
pub fn to_verdict(
    resp: &ProviderResponse,
    mapping: &CategoryMapping,
    threshold: f64,
) -> Result<Verdict, ProviderError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ProviderError::InvalidThreshold(threshold));
    }
    let mut score = f64::NEG_INFINITY;
    for name in &mapping.selected_categories {
        let s = resp
            .category_scores
            .get(name)
            .ok_or_else(|| ProviderError::MissingCategory(name.clone()))?;
        match mapping.combiner {
            Combiner::Max => score = score.max(*s),
        }
    }
    if mapping.selected_categories.is_empty() {
        return Err(ProviderError::MissingCategory("<none selected>".into()));
    }
    Ok(Verdict::new(score, threshold))
}
