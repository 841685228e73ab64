//! Audit orchestration behind the `modaudit` command line tool.
//!
//! An [`Audit`] is built from an [`AuditManifest`] and runs the experiment
//! commands, each writing stamped artifacts under the output directory:
//!
//! | command | artifacts |
//! |---|---|
//! | [`Audit::cmd_query`] | `scores/<provider>__<dataset>.jsonl` |
//! | [`Audit::cmd_metrics`] | `metrics/aggregate.csv`, `metrics/groups.csv`, `metrics/skipped.csv` |
//! | [`Audit::cmd_psa`] | `psa/ctf.csv`, `psa/pairs.jsonl`, `psa/ctf_<provider>.svg` |
//! | [`Audit::cmd_shap`] | `shap/attributions.jsonl`, `shap/global_{fp,fn}.csv`, `shap/coding_{fp,fn}.csv`, heat maps |
//! | [`Audit::cmd_report`] | all of the above plus `index.json` |

mod cli;
mod commands;
mod manifest;
mod plot;
mod scored;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use cli::{run, Cli, Command};
pub use commands::{Audit, CommandSummary, VerdictScorer};
pub use manifest::{AuditManifest, DatasetSpec, Experiments, Overrides, ShapSettings, MAX_EXACT_CAP};
pub use plot::render_ctf_svg;
pub use scored::{read_scored, scored_path, write_scored, ScoredRow};

/// Process exit status for a run that finished without item failures.
pub const EXIT_OK: i32 = 0;
/// Some items failed terminally; everything else was written.
pub const EXIT_PARTIAL: i32 = 1;
/// Bad configuration or a failure that stopped the run.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("provider `{provider}` needs a credential: set environment variable {var}")]
    MissingCredential { provider: String, var: String },
    #[error("no scores for provider `{provider}` on dataset `{dataset}`; run `modaudit query` first")]
    MissingScores { provider: String, dataset: String },
    #[error("{path}:{line}: {detail}")]
    BadScores {
        path: PathBuf,
        line: usize,
        detail: String,
    },
    #[error("provider `{0}` needs HTTP support, which this build lacks")]
    NoHttp(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Provider(#[from] crate::providers::ProviderError),
    #[error(transparent)]
    Scheduler(#[from] crate::scheduler::SchedulerError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Psa(#[from] crate::psa::PsaError),
    #[error(transparent)]
    Explain(#[from] crate::explain::ExplainError),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl ReportError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ReportError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
