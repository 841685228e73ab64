//! Threshold-variant and threshold-invariant performance metrics.
//!
//! Rates whose denominator is zero are `None` rather than a conventional
//! zero, and serialize to empty CSV cells.

mod auc;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auc::{pinned_auc, roc_auc, PinnedAucEstimate, DEFAULT_PINNED_REPEATS};

use crate::corpus::Label;
use crate::output::{fmt_opt, Stamp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no scored examples")]
    EmptyInput,
    #[error("score {score} of `{id}` is outside [0, 1]")]
    ScoreOutOfRange { id: String, score: f64 },
    #[error("only one gold class present{}", .0.as_ref().map(|g| format!(" in group `{g}`")).unwrap_or_default())]
    OneClassOnly(Option<String>),
    #[error("group `{0}` has no examples")]
    EmptyGroup(String),
    #[error("group `{group}` needs {needed} background examples, only {available} available")]
    InsufficientBackground {
        group: String,
        needed: usize,
        available: usize,
    },
    #[error("repeats must be at least 1")]
    InvalidRepeats,
    #[error("no aggregate report to compare groups against")]
    MissingAggregate,
}

/// One example with its verdict score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredExample {
    pub id: String,
    pub gold_label: Label,
    pub score: f64,
    #[serde(default)]
    pub groups: BTreeSet<String>,
}

pub(crate) fn check_scores(scored: &[ScoredExample]) -> Result<(), MetricsError> {
    if scored.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    match scored.iter().find(|s| !(0.0..=1.0).contains(&s.score)) {
        Some(s) => Err(MetricsError::ScoreOutOfRange {
            id: s.id.clone(),
            score: s.score,
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }
}

/// Counts with `flagged <=> score >= threshold`.
pub fn confusion(scored: &[ScoredExample], threshold: f64) -> Result<ConfusionCounts, MetricsError> {
    check_scores(scored)?;
    let mut c = ConfusionCounts::default();
    for s in scored {
        match (s.gold_label.is_hate(), s.score >= threshold) {
            (true, true) => c.tp += 1,
            (true, false) => c.fn_ += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub acc: Option<f64>,
    pub f1: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn threshold_metrics(c: &ConfusionCounts) -> ThresholdMetrics {
    ThresholdMetrics {
        acc: ratio(c.tp + c.tn, c.total()),
        f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        tpr: ratio(c.tp, c.positives()),
        fpr: ratio(c.fp, c.negatives()),
        fnr: ratio(c.fn_, c.positives()),
    }
}

/// Metrics for one (provider, dataset, slice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub provider_id: String,
    pub dataset: String,
    /// `aggregate` or a group id.
    pub slice: String,
    pub n: usize,
    pub threshold: f64,
    pub counts: ConfusionCounts,
    pub acc: Option<f64>,
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub fnr: Option<f64>,
}

pub const AGGREGATE: &str = "aggregate";

impl MetricsReport {
    /// Builds a report; a one-class slice gets an undefined AUC.
    pub fn compute(
        scored: &[ScoredExample],
        provider_id: &str,
        dataset: &str,
        slice: &str,
        threshold: f64,
    ) -> Result<Self, MetricsError> {
        let counts = confusion(scored, threshold)?;
        let m = threshold_metrics(&counts);
        let auc = match roc_auc(scored) {
            Ok(a) => Some(a),
            Err(MetricsError::OneClassOnly(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            provider_id: provider_id.to_string(),
            dataset: dataset.to_string(),
            slice: slice.to_string(),
            n: scored.len(),
            threshold,
            counts,
            acc: m.acc,
            auc,
            f1: m.f1,
            tpr: m.tpr,
            fpr: m.fpr,
            fnr: m.fnr,
        })
    }

    pub fn is_aggregate(&self) -> bool {
        self.slice == AGGREGATE
    }
}

/// Group minus aggregate rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OddsGap {
    pub fpr_gap: Option<f64>,
    pub fnr_gap: Option<f64>,
}

fn diff(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    Some(a? - b?)
}

/// FPR and FNR gap of every group report against the aggregate one.
pub fn equality_of_odds_gaps(
    reports: &[MetricsReport],
) -> Result<BTreeMap<String, OddsGap>, MetricsError> {
    let agg = reports
        .iter()
        .find(|r| r.is_aggregate())
        .ok_or(MetricsError::MissingAggregate)?;
    Ok(reports
        .iter()
        .filter(|r| !r.is_aggregate())
        .map(|r| {
            (
                r.slice.clone(),
                OddsGap {
                    fpr_gap: diff(r.fpr, agg.fpr),
                    fnr_gap: diff(r.fnr, agg.fnr),
                },
            )
        })
        .collect())
}

/// Pinned AUC together with the group's threshold metrics and gaps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnedRow {
    pub report: MetricsReport,
    /// `None` when the group holds a single class.
    pub pinned: Option<PinnedAucEstimate>,
    pub gap: OddsGap,
}

const METRIC_HEADER: [&str; 9] = ["provider", "dataset", "slice", "n", "acc", "auc", "f1", "fpr", "fnr"];

fn metric_cells(r: &MetricsReport) -> Vec<String> {
    vec![
        r.provider_id.clone(),
        r.dataset.clone(),
        r.slice.clone(),
        r.n.to_string(),
        fmt_opt(r.acc),
        fmt_opt(r.auc),
        fmt_opt(r.f1),
        fmt_opt(r.fpr),
        fmt_opt(r.fnr),
    ]
}

/// Aggregate-style table: `provider,dataset,slice,n,acc,auc,f1,fpr,fnr`.
pub fn write_metrics_csv<W: Write>(
    reports: &[MetricsReport],
    stamp: &Stamp,
    mut out: W,
) -> csv::Result<()> {
    stamp.write_comment(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRIC_HEADER)?;
    for r in reports {
        w.write_record(metric_cells(r))?;
    }
    w.flush()?;
    Ok(())
}

/// Per-group table: the metric columns followed by
/// `mean_auc,std_error,repeats,seed,fpr_gap,fnr_gap`.
pub fn write_pinned_csv<W: Write>(rows: &[PinnedRow], stamp: &Stamp, mut out: W) -> csv::Result<()> {
    stamp.write_comment(&mut out)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = METRIC_HEADER.to_vec();
    header.extend(["mean_auc", "std_error", "repeats", "seed", "fpr_gap", "fnr_gap"]);
    w.write_record(&header)?;
    for row in rows {
        let mut cells = metric_cells(&row.report);
        let p = row.pinned.as_ref();
        cells.extend([
            fmt_opt(p.map(|p| p.mean_auc)),
            fmt_opt(p.map(|p| p.std_error)),
            p.map(|p| p.repeats.to_string()).unwrap_or_default(),
            p.map(|p| p.seed.to_string()).unwrap_or_default(),
            fmt_opt(row.gap.fpr_gap),
            fmt_opt(row.gap.fnr_gap),
        ]);
        w.write_record(cells)?;
    }
    w.flush()?;
    Ok(())
}
