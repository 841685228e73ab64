use std::cmp::Ordering;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_scores, MetricsError, ScoredExample};
use crate::corpus::mix_seed;

/// Default number of pinned-AUC repeats.
pub const DEFAULT_PINNED_REPEATS: usize = 20;

/// ROC AUC as the Mann-Whitney probability that a random positive outranks
/// a random negative, ties counting one half.
///
/// Uses the rank-sum with average ranks for ties. The statistic is kept as
/// the exact integer `2U` until the final division, so datasets that are
/// copies of one another yield bit-identical results.
pub fn roc_auc(scored: &[ScoredExample]) -> Result<f64, MetricsError> {
    check_scores(scored)?;
    let pairs: Vec<(bool, f64)> = scored
        .iter()
        .map(|s| (s.gold_label.is_hate(), s.score))
        .collect();
    auc_of(&pairs).ok_or(MetricsError::OneClassOnly(None))
}

/// AUC of `(is_positive, score)` pairs; `None` when a class is missing.
pub(crate) fn auc_of(pairs: &[(bool, f64)]) -> Option<f64> {
    let mut sorted: Vec<(f64, bool)> = pairs.iter().map(|&(p, s)| (s, p)).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
    let positives = sorted.iter().filter(|(_, p)| *p).count() as u128;
    let negatives = sorted.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    // Twice the rank sum of positives; a tie block at 1-based ranks
    // a..a+k-1 gives each member the average rank (2a + k - 1) / 2.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        let k = (j - i) as u128;
        let a = i as u128 + 1;
        let pos_in_block = sorted[i..j].iter().filter(|(_, p)| *p).count() as u128;
        twice_rank_sum += pos_in_block * (2 * a + k - 1);
        i = j;
    }
    let twice_u = twice_rank_sum - positives * (positives + 1);
    Some(twice_u as f64 / (2 * positives * negatives) as f64)
}

/// AUC on a half-group, half-background set, averaged over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedAucEstimate {
    pub group: String,
    pub mean_auc: f64,
    /// Standard error of the mean across repeats; 0 for a single repeat.
    pub std_error: f64,
    pub repeats: usize,
    pub seed: u64,
    /// Per-repeat values in draw order.
    pub per_repeat: Vec<f64>,
}

/// Pinned ROC AUC for `group`.
///
/// Each repeat joins the whole group slice with a uniform sample, without
/// replacement, of the same size drawn from all of `all` (group members
/// included), and computes [`roc_auc`] on the union. Repeats draw from one
/// seeded stream, so the first `r` repeats do not depend on `repeats`.
pub fn pinned_auc(
    all: &[ScoredExample],
    group: &str,
    repeats: usize,
    seed: u64,
) -> Result<PinnedAucEstimate, MetricsError> {
    check_scores(all)?;
    if repeats == 0 {
        return Err(MetricsError::InvalidRepeats);
    }
    let slice: Vec<(bool, f64)> = all
        .iter()
        .filter(|s| s.groups.contains(group))
        .map(|s| (s.gold_label.is_hate(), s.score))
        .collect();
    if slice.is_empty() {
        return Err(MetricsError::EmptyGroup(group.to_string()));
    }
    let both = slice.iter().any(|p| p.0) && slice.iter().any(|p| !p.0);
    if !both {
        return Err(MetricsError::OneClassOnly(Some(group.to_string())));
    }
    if all.len() < slice.len() {
        return Err(MetricsError::InsufficientBackground {
            group: group.to_string(),
            needed: slice.len(),
            available: all.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, group));
    let mut per_repeat = Vec::with_capacity(repeats);
    let mut pinned = Vec::with_capacity(2 * slice.len());
    for _ in 0..repeats {
        pinned.clear();
        pinned.extend_from_slice(&slice);
        let mut idx = sample(&mut rng, all.len(), slice.len()).into_vec();
        idx.sort_unstable();
        pinned.extend(idx.iter().map(|&i| (all[i].gold_label.is_hate(), all[i].score)));
        per_repeat.push(auc_of(&pinned).expect("slice holds both classes"));
    }
    let (mean_auc, std_error) = mean_and_se(&per_repeat);
    Ok(PinnedAucEstimate {
        group: group.to_string(),
        mean_auc,
        std_error,
        repeats,
        seed,
        per_repeat,
    })
}

/// Mean and standard error, computed relative to the first value so that
/// identical inputs give that value and 0 exactly.
pub(crate) fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let x0 = xs[0];
    let mean_delta = xs.iter().map(|x| x - x0).sum::<f64>() / n;
    let mean = x0 + mean_delta;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - x0 - mean_delta).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use proptest::prelude::*;

    pub(crate) fn brute_force_auc(pairs: &[(bool, f64)]) -> Option<f64> {
        let pos: Vec<f64> = pairs.iter().filter(|p| p.0).map(|p| p.1).collect();
        let neg: Vec<f64> = pairs.iter().filter(|p| !p.0).map(|p| p.1).collect();
        if pos.is_empty() || neg.is_empty() {
            return None;
        }
        let mut twice_wins = 0u64;
        for p in &pos {
            for n in &neg {
                twice_wins += if p > n { 2 } else if p == n { 1 } else { 0 };
            }
        }
        Some(twice_wins as f64 / (2 * pos.len() * neg.len()) as f64)
    }

    fn ex(i: usize, hate: bool, score: f64, groups: &[&str]) -> ScoredExample {
        ScoredExample {
            id: format!("x{i}"),
            gold_label: Label::from(hate),
            score,
            groups: groups.iter().map(|g| g.to_string()).collect(),
        }
    }

    #[test]
    fn hand_example() {
        let s = [
            ex(0, true, 0.8, &[]),
            ex(1, false, 0.8, &[]),
            ex(2, true, 0.3, &[]),
            ex(3, false, 0.1, &[]),
        ];
        assert_eq!(roc_auc(&s).unwrap(), 0.625);
    }

    #[test]
    fn perfect_and_all_ties() {
        let s: Vec<_> = (0..6).map(|i| ex(i, i % 2 == 0, (i % 2 == 0) as u8 as f64, &[])).collect();
        assert_eq!(roc_auc(&s).unwrap(), 1.0);
        let s: Vec<_> = (0..6).map(|i| ex(i, i % 2 == 0, 0.4, &[])).collect();
        assert_eq!(roc_auc(&s).unwrap(), 0.5);
    }

    #[test]
    fn one_class() {
        let s = [ex(0, true, 0.2, &[]), ex(1, true, 0.9, &[])];
        assert_eq!(roc_auc(&s), Err(MetricsError::OneClassOnly(None)));
    }

    #[test]
    fn pinned_whole_dataset_is_aggregate() {
        let s: Vec<_> = (0..40)
            .map(|i| ex(i, i % 3 == 0, ((i * 37) % 17) as f64 / 16.0, &["all"]))
            .collect();
        let agg = roc_auc(&s).unwrap();
        let p = pinned_auc(&s, "all", 20, 11).unwrap();
        assert_eq!(p.mean_auc, agg);
        assert_eq!(p.std_error, 0.0);
    }

    #[test]
    fn pinned_prefix_stable_in_repeats() {
        let s: Vec<_> = (0..60)
            .map(|i| ex(i, i % 2 == 0, ((i * 13) % 29) as f64 / 28.0, if i < 20 { &["g"] } else { &[] }))
            .collect();
        let one = pinned_auc(&s, "g", 1, 5).unwrap();
        let many = pinned_auc(&s, "g", 20, 5).unwrap();
        assert_eq!(one.per_repeat[0], many.per_repeat[0]);
        assert_eq!(one.std_error, 0.0);
        assert_eq!(pinned_auc(&s, "g", 20, 5).unwrap(), many);
    }

    #[test]
    fn pinned_errors() {
        let s = [ex(0, true, 0.2, &["g"]), ex(1, false, 0.9, &[])];
        assert_eq!(
            pinned_auc(&s, "g", 5, 0),
            Err(MetricsError::OneClassOnly(Some("g".into())))
        );
        assert_eq!(pinned_auc(&s, "h", 5, 0), Err(MetricsError::EmptyGroup("h".into())));
    }

    proptest! {
        #[test]
        fn matches_brute_force(pairs in prop::collection::vec((any::<bool>(), 0u8..12), 2..200)) {
            let pairs: Vec<(bool, f64)> = pairs.into_iter().map(|(p, s)| (p, s as f64 / 11.0)).collect();
            let fast = auc_of(&pairs);
            let slow = brute_force_auc(&pairs);
            match (fast, slow) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-12),
                (a, b) => prop_assert_eq!(a, b),
            }
        }

        #[test]
        fn negation_complements(scores in prop::collection::vec(0.0f64..1.0, 4..100)) {
            let pairs: Vec<(bool, f64)> = scores.iter().enumerate().map(|(i, &s)| (i % 2 == 0, s)).collect();
            let mut distinct = scores.clone();
            distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
            distinct.dedup();
            prop_assume!(distinct.len() == scores.len());
            let neg: Vec<(bool, f64)> = pairs.iter().map(|&(p, s)| (p, -s)).collect();
            let total = auc_of(&pairs).unwrap() + auc_of(&neg).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn monotone_transform_invariant(
            scores in prop::collection::vec((0u32..10_000).prop_map(|x| x as f64 / 1e4), 4..100),
            shift in -3.0f64..3.0,
        ) {
            let pairs: Vec<(bool, f64)> = scores.iter().enumerate().map(|(i, &s)| (i % 3 == 0, s)).collect();
            let cubed: Vec<_> = pairs.iter().map(|&(p, s)| (p, s.powi(3))).collect();
            let sig: Vec<_> = pairs.iter().map(|&(p, s)| (p, 1.0 / (1.0 + (-(s + shift)).exp()))).collect();
            let a = auc_of(&pairs).unwrap();
            prop_assert!((a - auc_of(&cubed).unwrap()).abs() < 1e-12);
            prop_assert!((a - auc_of(&sig).unwrap()).abs() < 1e-12);
        }
    }
}
