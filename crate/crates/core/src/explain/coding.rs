//! Support for manual review of misclassified sentences: the codebooks,
//! stratified sampling into coding sheets, and inter-coder agreement.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ErrorKind, ExplainError, TokenAttribution};
use crate::corpus::{mix_seed, Label};
use crate::output::{fmt4, Stamp};

macro_rules! codebook {
    ($name:ident { $($variant:ident => $code:literal, $desc:literal;)* }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $code)] $variant,)*
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),*];

            pub fn code(self) -> &'static str {
                match self { $($name::$variant => $code,)* }
            }

            /// Short guidance for coders.
            pub fn description(self) -> &'static str {
                match self { $($name::$variant => $desc,)* }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.code())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|c| c.code().eq_ignore_ascii_case(s.trim()))
                    .ok_or_else(|| format!("unknown {} code `{s}`", stringify!($name)))
            }
        }
    };
}

codebook!(FpCode {
    Cs => "CS", "Opposes or criticises hateful content, possibly quoting it.";
    Re => "RE", "An in-group speaker uses a slur about their own group in a reclaimed sense.";
    Os => "OS", "Profanity or swearing without a hateful target drives the flag.";
    Ls => "LS", "A slur is mentioned or used in a way that is not hateful.";
    Da => "DA", "Dialectal spelling or grammar, for example African-American English.";
    Sos => "SOS", "Neutral or positive mention of an identity group is treated as hateful.";
    Ne => "NE", "A hateful statement is negated.";
    Np => "NP", "Abuse aimed at a group that is not protected.";
    De => "DE", "Describes or reports on discrimination without endorsing it.";
    Hate => "HATE", "The coder considers the sentence hateful despite its gold label.";
    Unsure => "UNSURE", "Needs more context, or the reason for the error is unclear.";
});

codebook!(FnCode {
    Imp => "IMP", "Hate carried by stereotype, irony or coded wording without explicit terms.";
    Pos => "POS", "Positive vocabulary wraps a hateful message.";
    NeFn => "NE_FN", "Negation is used to express hate.";
    Par => "PAR", "The target is paraphrased instead of named.";
    DeFn => "DE_FN", "Hate phrased as a description or a seemingly factual claim.";
    CsFn => "CS_FN", "Hate disguised as, or embedded in, apparent counter-speech.";
    Spell => "SPELL", "Obfuscated or misspelled hateful terms.";
    NoHate => "NO_HATE", "The coder considers the sentence not hateful despite its gold label.";
    Unsure => "UNSURE", "Needs more context, or the reason for the error is unclear.";
});

/// A classified sentence as input to sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewCandidate {
    pub id: String,
    pub dataset: String,
    pub provider: String,
    pub text: String,
    pub score: f64,
    pub gold_label: Label,
    pub flagged: bool,
}

impl ReviewCandidate {
    pub fn error_kind(&self) -> Option<ErrorKind> {
        match (self.flagged, self.gold_label.is_hate()) {
            (true, false) => Some(ErrorKind::Fp),
            (false, true) => Some(ErrorKind::Fn),
            _ => None,
        }
    }
}

/// One coding-sheet row; the code columns start empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodingRow {
    pub id: String,
    pub dataset: String,
    pub provider: String,
    pub text: String,
    pub score: f64,
    pub gold: Label,
    /// Highest-magnitude token attributions, filled by [`annotate_top_tokens`].
    pub top_tokens: String,
    pub code_a: String,
    pub code_b: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CodingSheets {
    pub fp: Vec<CodingRow>,
    pub fn_: Vec<CodingRow>,
}

impl CodingSheets {
    pub fn get(&self, kind: ErrorKind) -> &[CodingRow] {
        match kind {
            ErrorKind::Fp => &self.fp,
            ErrorKind::Fn => &self.fn_,
        }
    }
}

/// Rows drawn from a stratum of `n` at `rate`. The small slack keeps
/// products such as `0.05 * 60` from rounding up past the exact integer.
pub fn stratum_sample_size(n: usize, rate: f64) -> usize {
    (((rate * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Uniform samples of false positives and false negatives, drawn
/// independently for every (provider, dataset) stratum.
///
/// Rows keep their input order within a stratum; strata are emitted in
/// provider then dataset order.
pub fn sample_misclassifications(
    scored: &[ReviewCandidate],
    rate: f64,
    seed: u64,
) -> Result<CodingSheets, ExplainError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(ExplainError::InvalidRate(rate));
    }
    let mut strata: BTreeMap<(&str, &str, ErrorKind), Vec<&ReviewCandidate>> = BTreeMap::new();
    for c in scored {
        if let Some(kind) = c.error_kind() {
            strata.entry((&c.provider, &c.dataset, kind)).or_default().push(c);
        }
    }
    let mut sheets = CodingSheets::default();
    for ((provider, dataset, kind), members) in strata {
        let k = stratum_sample_size(members.len(), rate);
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(
            seed,
            &format!("coding/{provider}/{dataset}/{}", kind.as_str()),
        ));
        let mut idx = sample(&mut rng, members.len(), k).into_vec();
        idx.sort_unstable();
        let rows = idx.into_iter().map(|i| {
            let c = members[i];
            CodingRow {
                id: c.id.clone(),
                dataset: c.dataset.clone(),
                provider: c.provider.clone(),
                text: c.text.clone(),
                score: c.score,
                gold: c.gold_label,
                top_tokens: String::new(),
                code_a: String::new(),
                code_b: String::new(),
            }
        });
        match kind {
            ErrorKind::Fp => sheets.fp.extend(rows),
            ErrorKind::Fn => sheets.fn_.extend(rows),
        }
    }
    Ok(sheets)
}

/// `token:+0.1234` pairs for the `k` largest absolute attributions.
pub fn top_tokens(att: &TokenAttribution, k: usize) -> String {
    let mut idx: Vec<usize> = (0..att.tokens.len()).collect();
    idx.sort_by(|&a, &b| att.shapley[b].abs().total_cmp(&att.shapley[a].abs()).then(a.cmp(&b)));
    idx.iter()
        .take(k)
        .map(|&i| format!("{}:{:+.4}", att.tokens[i], att.shapley[i]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Fills `top_tokens` for every row whose (provider, id) has an attribution.
pub fn annotate_top_tokens(rows: &mut [CodingRow], attributions: &[TokenAttribution], k: usize) {
    let by_id: BTreeMap<(&str, &str), &TokenAttribution> = attributions
        .iter()
        .map(|a| ((a.provider_id.as_str(), a.source_id.as_str()), a))
        .collect();
    for row in rows {
        if let Some(a) = by_id.get(&(row.provider.as_str(), row.id.as_str())) {
            row.top_tokens = top_tokens(a, k);
        }
    }
}

pub const CODING_COLUMNS: [&str; 9] = [
    "id", "dataset", "provider", "text", "score", "gold", "top_tokens", "code_a", "code_b",
];

pub fn write_coding_sheet<W: Write>(rows: &[CodingRow], stamp: &Stamp, mut out: W) -> csv::Result<()> {
    stamp.write_comment(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CODING_COLUMNS)?;
    for r in rows {
        let gold = r.gold.as_u8().to_string();
        let score = fmt4(r.score);
        w.write_record([
            r.id.as_str(),
            &r.dataset,
            &r.provider,
            &r.text,
            &score,
            &gold,
            &r.top_tokens,
            &r.code_a,
            &r.code_b,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Cohen's kappa with the number of items it was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kappa {
    /// `None` when chance agreement is 1 but observed agreement is not.
    pub value: Option<f64>,
    pub n: usize,
    pub excluded: usize,
}

/// Cohen's kappa between two coders, after dropping every item where
/// either coder used a code in `exclude`.
pub fn cohens_kappa<T: Ord>(a: &[T], b: &[T], exclude: &[T]) -> Result<Kappa, ExplainError> {
    if a.len() != b.len() {
        return Err(ExplainError::LengthMismatch { a: a.len(), b: b.len() });
    }
    let kept: Vec<(&T, &T)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| !exclude.contains(x) && !exclude.contains(y))
        .collect();
    if kept.is_empty() {
        return Err(ExplainError::EmptyAfterExclusion);
    }
    let n = kept.len() as i128;
    let agree = kept.iter().filter(|(x, y)| x == y).count() as i128;
    let mut margins: BTreeMap<&T, (i128, i128)> = BTreeMap::new();
    for (x, y) in &kept {
        margins.entry(x).or_default().0 += 1;
        margins.entry(y).or_default().1 += 1;
    }
    // With p_o = agree/n and p_e = chance/n^2, kappa reduces to
    // (n*agree - chance) / (n^2 - chance) over integers.
    let chance: i128 = margins.values().map(|(ra, rb)| ra * rb).sum();
    let den = n * n - chance;
    let num = n * agree - chance;
    let value = if den == 0 {
        (num == 0).then_some(1.0)
    } else {
        Some(num as f64 / den as f64)
    };
    Ok(Kappa {
        value,
        n: kept.len(),
        excluded: a.len() - kept.len(),
    })
}
