use std::fmt;

use serde::{Deserialize, Serialize};

use super::{t_quantile, CounterfactualPair, PsaError};
use crate::corpus::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSlice {
    Toxic,
    NonToxic,
}

impl LabelSlice {
    pub fn of(label: Label) -> Self {
        if label.is_hate() {
            LabelSlice::Toxic
        } else {
            LabelSlice::NonToxic
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelSlice::Toxic => "toxic",
            LabelSlice::NonToxic => "non_toxic",
        }
    }
}

impl fmt::Display for LabelSlice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A counterfactual pair with verdict scores for both sides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub pair: CounterfactualPair,
    pub marginalized_score: f64,
    pub dominant_score: f64,
}

impl ScoredPair {
    /// `score(dominant) - score(marginalized)`.
    pub fn ctf(&self) -> f64 {
        self.dominant_score - self.marginalized_score
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtfResult {
    pub group: String,
    pub label_slice: LabelSlice,
    pub provider_id: String,
    pub n: usize,
    pub mean_ctf: f64,
    /// 95% Student-t interval; `None` when `n == 1`.
    pub ci: Option<(f64, f64)>,
    /// `(pair id, ctf)` in input order.
    pub per_pair: Vec<(String, f64)>,
}

impl CtfResult {
    pub fn ci_low(&self) -> Option<f64> {
        self.ci.map(|c| c.0)
    }

    pub fn ci_high(&self) -> Option<f64> {
        self.ci.map(|c| c.1)
    }
}

/// Mean CTF with a 95% t-interval over the pairs of one group and one gold
/// label slice. Toxic and non-toxic slices are never pooled.
pub fn ctf_scores(
    pairs: &[ScoredPair],
    group: &str,
    slice: LabelSlice,
    provider_id: &str,
) -> Result<CtfResult, PsaError> {
    let per_pair: Vec<(String, f64)> = pairs
        .iter()
        .filter(|p| p.pair.group == group && LabelSlice::of(p.pair.gold_label) == slice)
        .map(|p| (p.pair.pair_id.clone(), p.ctf()))
        .collect();
    let n = per_pair.len();
    if n == 0 {
        return Err(PsaError::EmptySlice {
            group: group.to_string(),
            slice,
        });
    }
    let mean = per_pair.iter().map(|(_, v)| v).sum::<f64>() / n as f64;
    let ci = (n >= 2).then(|| {
        let var = per_pair.iter().map(|(_, v)| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let half = t_quantile(0.975, (n - 1) as u64) * (var / n as f64).sqrt();
        (mean - half, mean + half)
    });
    Ok(CtfResult {
        group: group.to_string(),
        label_slice: slice,
        provider_id: provider_id.to_string(),
        n,
        mean_ctf: mean,
        ci,
        per_pair,
    })
}
