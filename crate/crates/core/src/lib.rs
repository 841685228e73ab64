//! Black-box audit harness for text moderation classifiers.
//!
//! The crate is organised around the three experiments of an over- and
//! under-moderation audit:
//!
//! * [`metrics`]: threshold-variant and threshold-invariant performance
//!   metrics, aggregate and per target group, including pinned ROC AUC.
//! * [`psa`]: perturbation sensitivity analysis over counterfactual
//!   marginalized/dominant sentence pairs and counterfactual token fairness.
//! * [`explain`]: tokenized Shapley attribution with mask perturbation,
//!   global token clusters and qualitative coding support.
//!
//! Classifiers are reached through [`providers`] (wire adapters and verdict
//! mapping) and queried in bulk by [`scheduler`] (rate limiting, retries,
//! persistent cache, resumable progress). [`report`] ties everything into the
//! `modaudit` command line tool.

pub mod corpus;
pub mod explain;
pub mod metrics;
pub mod output;
pub mod providers;
pub mod psa;
pub mod report;
pub mod scheduler;

mod digest;

pub use digest::sha256_hex;
