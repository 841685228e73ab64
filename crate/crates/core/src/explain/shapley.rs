use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExplainError, TokenSequence};
use crate::providers::MockLexicon;

pub const DEFAULT_MASK: &str = "[MASK]";
pub const DEFAULT_EXACT_CAP: usize = 12;
pub const DEFAULT_PERMUTATIONS: usize = 200;

/// Anything that maps a text to a scalar score.
pub trait TextScorer {
    fn score(&self, text: &str) -> Result<f64, ExplainError>;
}

impl TextScorer for MockLexicon {
    fn score(&self, text: &str) -> Result<f64, ExplainError> {
        Ok(MockLexicon::score(self, text))
    }
}

/// Adapts an infallible closure.
pub struct FnScorer<F>(pub F);

impl<F: Fn(&str) -> f64> TextScorer for FnScorer<F> {
    fn score(&self, text: &str) -> Result<f64, ExplainError> {
        Ok((self.0)(text))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapMode {
    Exact,
    Sampled { n_samples: usize, seed: u64 },
}

/// Per-token Shapley values for one scored text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAttribution {
    pub source_id: String,
    pub provider_id: String,
    pub tokens: Vec<String>,
    pub shapley: Vec<f64>,
    /// Monte-Carlo standard errors; all zero in exact mode.
    pub std_errors: Vec<f64>,
    /// Score with every token masked.
    pub base_value: f64,
    /// Score of the unmasked text.
    pub full_value: f64,
    pub mode: ShapMode,
    pub mask_token: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapConfig {
    pub mask_token: String,
    /// Longest sequence explained by full coalition enumeration.
    pub exact_cap: usize,
    /// Permutations for longer sequences.
    pub n_samples: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self {
            mask_token: DEFAULT_MASK.into(),
            exact_cap: DEFAULT_EXACT_CAP,
            n_samples: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

/// Exact Shapley values of an `n`-player game by enumerating all `2^n`
/// coalitions. `v` receives a membership bitmask (bit `i` set when player
/// `i` is present) and is called once per coalition.
pub fn exact_shapley_values<E>(
    n: usize,
    mut v: impl FnMut(u64) -> Result<f64, E>,
) -> Result<Vec<f64>, E> {
    assert!(n < 64, "exact enumeration supports fewer than 64 players");
    let size = 1usize << n;
    let mut values = Vec::with_capacity(size);
    for mask in 0..size as u64 {
        values.push(v(mask)?);
    }
    // weight(|S|) = |S|! (n - |S| - 1)! / n! = 1 / (n * C(n-1, |S|))
    let weights: Vec<f64> = (0..n.max(1))
        .map(|k| 1.0 / (n as f64 * binomial(n.saturating_sub(1), k)))
        .collect();
    let mut phi = vec![0.0; n];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u64 << i;
        let mut acc = 0.0;
        for mask in 0..size as u64 {
            if mask & bit == 0 {
                let k = mask.count_ones() as usize;
                acc += weights[k] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
        *p = acc;
    }
    Ok(phi)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Result of permutation sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledShapley {
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Permutation-sampling estimate of Shapley values.
///
/// Each permutation adds players one at a time and credits every player
/// with the change it causes, so contributions telescope to
/// `v(all) - v(none)` within each permutation. Coalition values are
/// memoized, so `v` is called at most once per distinct coalition.
pub fn sampled_shapley_values<E>(
    n: usize,
    n_samples: usize,
    seed: u64,
    mut v: impl FnMut(&[bool]) -> Result<f64, E>,
) -> Result<SampledShapley, E> {
    assert!(n_samples >= 1, "at least one permutation is required");
    let mut memo: HashMap<Vec<u64>, f64> = HashMap::new();
    let mut eval = |members: &[bool]| -> Result<f64, E> {
        let key = pack(members);
        if let Some(&x) = memo.get(&key) {
            return Ok(x);
        }
        let x = v(members)?;
        memo.insert(key, x);
        Ok(x)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut sum = vec![0.0; n];
    let mut sum_sq = vec![0.0; n];
    let mut members = vec![false; n];
    for _ in 0..n_samples {
        order.shuffle(&mut rng);
        members.iter_mut().for_each(|m| *m = false);
        let mut prev = eval(&members)?;
        for &i in &order {
            members[i] = true;
            let cur = eval(&members)?;
            let d = cur - prev;
            sum[i] += d;
            sum_sq[i] += d * d;
            prev = cur;
        }
    }
    let m = n_samples as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / m).collect();
    let std_errors = values
        .iter()
        .zip(&sum_sq)
        .map(|(mean, sq)| {
            if n_samples < 2 {
                0.0
            } else {
                let var = ((sq - m * mean * mean) / (m - 1.0)).max(0.0);
                (var / m).sqrt()
            }
        })
        .collect();
    Ok(SampledShapley { values, std_errors })
}

fn pack(members: &[bool]) -> Vec<u64> {
    let mut words = vec![0u64; members.len().div_ceil(64)];
    for (i, &m) in members.iter().enumerate() {
        if m {
            words[i / 64] |= 1 << (i % 64);
        }
    }
    words
}

fn empty_attribution(seq: &TokenSequence, provider_id: &str, mask: &str, mode: ShapMode, base: f64, full: f64) -> TokenAttribution {
    TokenAttribution {
        source_id: seq.source_id.clone(),
        provider_id: provider_id.to_string(),
        tokens: seq.tokens.clone(),
        shapley: Vec::new(),
        std_errors: Vec::new(),
        base_value: base,
        full_value: full,
        mode,
        mask_token: mask.to_string(),
    }
}

/// Exact attribution; tokens outside a coalition are replaced by `mask`.
pub fn shap_exact(
    scorer: &dyn TextScorer,
    provider_id: &str,
    text: &str,
    seq: &TokenSequence,
    mask: &str,
    cap: usize,
) -> Result<TokenAttribution, ExplainError> {
    let n = seq.len();
    if n > cap {
        return Err(ExplainError::TooManyTokens { n, cap });
    }
    let full_mask = (1u64 << n) - 1;
    let mut base = 0.0;
    let mut full = 0.0;
    let shapley = exact_shapley_values(n, |mask_bits| {
        let t = seq.masked_text(text, mask, |i| mask_bits & (1 << i) != 0);
        let x = scorer.score(&t)?;
        if mask_bits == 0 {
            base = x;
        }
        if mask_bits == full_mask {
            full = x;
        }
        Ok::<_, ExplainError>(x)
    })?;
    let mut att = empty_attribution(seq, provider_id, mask, ShapMode::Exact, base, full);
    att.std_errors = vec![0.0; n];
    att.shapley = shapley;
    Ok(att)
}

/// Permutation-sampled attribution.
pub fn shap_sampled(
    scorer: &dyn TextScorer,
    provider_id: &str,
    text: &str,
    seq: &TokenSequence,
    mask: &str,
    n_samples: usize,
    seed: u64,
) -> Result<TokenAttribution, ExplainError> {
    if n_samples == 0 {
        return Err(ExplainError::InvalidSamples);
    }
    let n = seq.len();
    let score_members = |members: &[bool]| scorer.score(&seq.masked_text(text, mask, |i| members[i]));
    let est = sampled_shapley_values(n, n_samples, seed, score_members)?;
    let base = score_members(&vec![false; n])?;
    let full = score_members(&vec![true; n])?;
    let mode = ShapMode::Sampled { n_samples, seed };
    let mut att = empty_attribution(seq, provider_id, mask, mode, base, full);
    att.shapley = est.values;
    att.std_errors = est.std_errors;
    Ok(att)
}

/// Exact mode up to `cfg.exact_cap` tokens, sampling beyond.
pub fn explain_text(
    scorer: &dyn TextScorer,
    provider_id: &str,
    text: &str,
    seq: &TokenSequence,
    cfg: &ShapConfig,
) -> Result<TokenAttribution, ExplainError> {
    if seq.len() <= cfg.exact_cap {
        shap_exact(scorer, provider_id, text, seq, &cfg.mask_token, cfg.exact_cap)
    } else {
        let seed = crate::corpus::mix_seed(cfg.seed, &seq.source_id);
        shap_sampled(scorer, provider_id, text, seq, &cfg.mask_token, cfg.n_samples, seed)
    }
}
