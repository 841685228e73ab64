//! Perturbation sensitivity analysis.
//!
//! Identity tokens of marginalized groups are swapped for their dominant
//! counterparts while the rest of a sentence is held fixed. Both sides are
//! scored and the per-pair difference `score(dominant) - score(marginalized)`
//! is the counterfactual token fairness (CTF) value. A negative mean means
//! the marginalized token draws higher hate scores.

mod counterfactual;
mod ctf;
mod stats;
mod tokens;

use thiserror::Error;

pub use counterfactual::{
    find_occurrences, generate_counterfactuals, replace_token, CounterfactualPair,
    CounterfactualSet, Exclusion, ExclusionReason,
};
pub use ctf::{ctf_scores, CtfResult, LabelSlice, ScoredPair};
pub use stats::{normal_quantile, t_quantile};
pub use tokens::{builtin_token_table, load_token_table, parse_token_table, TokenPair};

#[derive(Debug, Error)]
pub enum PsaError {
    #[error("io error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("token table line {line}: {detail}")]
    Table { line: usize, detail: String },
    #[error("token table line {line}: duplicate marginalized token `{token}`")]
    DuplicatePair { line: usize, token: String },
    #[error("token table line {line}: empty token")]
    EmptyToken { line: usize },
    #[error("no scored pairs for group `{group}` in the {slice} slice")]
    EmptySlice { group: String, slice: LabelSlice },
}
