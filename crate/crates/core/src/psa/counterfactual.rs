use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::TokenPair;
use crate::corpus::{Corpus, Label};

/// Byte ranges of every case-insensitive, word-boundary occurrence of
/// `token` in `text`, left to right and non-overlapping.
///
/// A boundary is the start or end of the text or any character that is not
/// alphanumeric, so `gay` matches in `"gay, fine"` but not in `"gayety"`.
pub fn find_occurrences(text: &str, token: &str) -> Vec<Range<usize>> {
    let needle: Vec<char> = token.chars().flat_map(char::to_lowercase).collect();
    if needle.is_empty() {
        return Vec::new();
    }
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |c| c.0);
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let starts_word = i == 0 || !chars[i - 1].1.is_alphanumeric();
        if starts_word {
            if let Some(end) = match_at(&chars, i, &needle) {
                let ends_word = end == chars.len() || !chars[end].1.is_alphanumeric();
                if ends_word {
                    out.push(byte_at(i)..byte_at(end));
                    i = end;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

/// Index one past the last char of a case-insensitive match starting at `i`.
fn match_at(chars: &[(usize, char)], i: usize, needle: &[char]) -> Option<usize> {
    let mut j = i;
    let mut k = 0;
    while k < needle.len() {
        let (_, c) = chars.get(j)?;
        for lc in c.to_lowercase() {
            if needle.get(k) != Some(&lc) {
                return None;
            }
            k += 1;
        }
        j += 1;
    }
    Some(j)
}

/// Replaces every occurrence of `from` with `to`, returning the new text and
/// the number of replacements.
///
/// The inserted token is lowercase unless the replaced occurrence starts
/// with an uppercase letter, in which case its first letter is capitalized.
pub fn replace_token(text: &str, from: &str, to: &str) -> (String, usize) {
    let hits = find_occurrences(text, from);
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    let lower = to.to_lowercase();
    for r in &hits {
        out.push_str(&text[last..r.start]);
        let capitalized = text[r.clone()].chars().next().is_some_and(char::is_uppercase);
        if capitalized {
            let mut cs = lower.chars();
            if let Some(first) = cs.next() {
                out.extend(first.to_uppercase());
                out.push_str(cs.as_str());
            }
        } else {
            out.push_str(&lower);
        }
        last = r.end;
    }
    out.push_str(&text[last..]);
    (out, hits.len())
}

/// A marginalized/dominant sentence pair differing only in the identity token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualPair {
    /// `<source id>#<marginalized token>`.
    pub pair_id: String,
    pub source_id: String,
    pub group: String,
    pub token_pair: TokenPair,
    pub marginalized_text: String,
    pub dominant_text: String,
    pub gold_label: Label,
    /// Number of occurrences replaced.
    pub replacements: usize,
    /// Word count of the dominant token minus that of the marginalized one,
    /// per replacement (e.g. `latino -> white man` is +1).
    pub token_count_delta: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// Tokens of more than one group occur in the sentence.
    MultipleGroups,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub source_id: String,
    pub reason: ExclusionReason,
    pub groups: BTreeSet<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualSet {
    pub pairs: Vec<CounterfactualPair>,
    pub exclusions: Vec<Exclusion>,
}

/// One pair per (example, matching token pair). Sentences matching tokens of
/// several groups are excluded and logged.
pub fn generate_counterfactuals(corpus: &Corpus, table: &[TokenPair]) -> CounterfactualSet {
    let mut set = CounterfactualSet::default();
    for ex in corpus.examples() {
        let matched: Vec<&TokenPair> = table
            .iter()
            .filter(|tp| !find_occurrences(&ex.text, &tp.marginalized).is_empty())
            .collect();
        if matched.is_empty() {
            continue;
        }
        let groups: BTreeSet<String> = matched.iter().map(|tp| tp.group.clone()).collect();
        if groups.len() > 1 {
            set.exclusions.push(Exclusion {
                source_id: ex.id.clone(),
                reason: ExclusionReason::MultipleGroups,
                groups,
            });
            continue;
        }
        for tp in matched {
            let (dominant_text, replacements) = replace_token(&ex.text, &tp.marginalized, &tp.dominant);
            let words = |s: &str| s.split_whitespace().count() as i64;
            set.pairs.push(CounterfactualPair {
                pair_id: format!("{}#{}", ex.id, tp.marginalized),
                source_id: ex.id.clone(),
                group: tp.group.clone(),
                token_pair: tp.clone(),
                marginalized_text: ex.text.clone(),
                dominant_text,
                gold_label: ex.gold_label,
                replacements,
                token_count_delta: words(&tp.dominant) - words(&tp.marginalized),
            });
        }
    }
    set
}
