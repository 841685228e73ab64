//! Token-level explanations of classifier scores.
//!
//! Texts are split into WordPiece tokens and every token receives a Shapley
//! value from a mask-perturbation game: a coalition keeps its tokens and
//! replaces all others by a mask string. Per-sentence values are pooled
//! into clusters of similar tokens to describe false positives and false
//! negatives globally, and [`coding`] supports manual review of samples.

mod cluster;
pub mod coding;
mod render;
mod shapley;
mod tokenizer;

use std::path::PathBuf;

use thiserror::Error;

pub use cluster::{
    cluster_tokens, cosine, dbscan_cosine, global_attributions, Direction, Embeddings, ErrorKind,
    TokenCluster, DEFAULT_SIM_THRESHOLD, DEFAULT_TOP_K,
};
pub use coding::{
    annotate_top_tokens, cohens_kappa, sample_misclassifications, top_tokens, write_coding_sheet,
    CodingRow, CodingSheets, FnCode, FpCode, Kappa, ReviewCandidate,
};
pub use render::{merge_subwords, render_heatmap_svg, AttributionRecord};
pub use shapley::{
    exact_shapley_values, explain_text, sampled_shapley_values, shap_exact, shap_sampled, FnScorer,
    SampledShapley, ShapConfig, ShapMode, TextScorer, TokenAttribution, DEFAULT_EXACT_CAP,
    DEFAULT_MASK, DEFAULT_PERMUTATIONS,
};
pub use tokenizer::{TokenSequence, WordPiece, UNK_TOKEN};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{n} tokens exceed the exact-mode cap of {cap}")]
    TooManyTokens { n: usize, cap: usize },
    #[error("the number of sampled permutations must be at least 1")]
    InvalidSamples,
    #[error("similarity threshold {0} is outside (0, 1]")]
    InvalidThreshold(f64),
    #[error("sampling rate {0} is outside (0, 1]")]
    InvalidRate(f64),
    #[error("embeddings line {line}: {detail}")]
    Embeddings { line: usize, detail: String },
    #[error("coder lists differ in length ({a} vs {b})")]
    LengthMismatch { a: usize, b: usize },
    #[error("no items left after excluding codes")]
    EmptyAfterExclusion,
    #[error("scoring failed: {0}")]
    Scoring(String),
}
