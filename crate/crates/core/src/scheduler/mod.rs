//! Bulk querying under rate limits.
//!
//! A [`QueryJob`] is an ordered list of `(id, text)` items for one provider.
//! [`run_job`] yields one [`ItemOutcome`] per item, lazily and in item order.
//! Responses are served from the on-disk [`ResponseCache`] when present;
//! otherwise the request passes through the provider's [`RateLimiter`] and is
//! retried with exponential backoff on transient failures. A progress journal
//! lists finished ids so an interrupted job can be resumed.
//!
//! Time and network access are injected through [`Clock`] and [`Transport`],
//! so every timing property can be checked on a [`SimClock`].

mod cache;
mod client;
mod clock;
mod journal;
mod limiter;
mod transport;

use std::collections::{HashSet, VecDeque};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use cache::{cache_key, cache_lookup, CacheEntry, CorruptLine, ResponseCache, CACHE_SCHEMA_VERSION};
pub use client::{JobStats, ProviderClient, RetryPolicy};
pub use clock::{Clock, SimClock, SystemClock};
pub use journal::ProgressJournal;
pub use limiter::{max_issues_per_window, RateLimiter};
#[cfg(feature = "http")]
pub use transport::HttpTransport;
pub use transport::{Transport, TransportError, TransportResponse};

use crate::providers::{Credentials, ProviderError, ProviderResponse, ProviderSpec};

/// Job-level failures.
#[derive(Debug, Error)]
pub enum SchedulerError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: corrupt cache entry may hold `{key}`: {detail}")]
    CacheCorrupt {
        path: PathBuf,
        line: usize,
        key: String,
        detail: String,
    },
    #[error("duplicate item id `{0}` in job")]
    DuplicateItem(String),
    #[error("invalid rate {0}; must be a positive number of queries per second")]
    InvalidRate(f64),
    #[error("retry policy must allow at least one attempt")]
    InvalidRetry,
}

impl SchedulerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SchedulerError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Terminal failure for one item; the job continues past it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ItemError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Transport(TransportError),
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("could not write cache: {0}")]
    CacheWrite(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemOutcome {
    pub id: String,
    pub result: Result<ProviderResponse, ItemError>,
}

#[derive(Debug, Clone)]
pub struct QueryJob {
    pub provider: ProviderSpec,
    /// Distinguishes progress journals of different jobs on one provider.
    pub label: String,
    pub items: Vec<(String, String)>,
    pub rate_override: Option<f64>,
    pub cache_dir: PathBuf,
    pub retry: RetryPolicy,
    /// Keep the existing progress journal instead of starting a new one.
    pub resume: bool,
    /// Items in flight at once; the limiter still bounds the issue rate.
    pub concurrency: usize,
}

impl QueryJob {
    pub fn new(
        provider: ProviderSpec,
        label: impl Into<String>,
        items: Vec<(String, String)>,
        cache_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            provider,
            label: label.into(),
            items,
            rate_override: None,
            cache_dir: cache_dir.into(),
            retry: RetryPolicy::default(),
            resume: false,
            concurrency: 1,
        }
    }

    pub fn validate(&self) -> Result<(), SchedulerError> {
        let mut seen = HashSet::new();
        for (id, _) in &self.items {
            if !seen.insert(id.as_str()) {
                return Err(SchedulerError::DuplicateItem(id.clone()));
            }
        }
        Ok(())
    }
}

/// Lazy stream of outcomes. Dropping it part way leaves cache and journal
/// consistent for everything already yielded.
pub struct JobRun<'a> {
    job: &'a QueryJob,
    client: ProviderClient<'a>,
    journal: ProgressJournal,
    next: usize,
    ready: VecDeque<ItemOutcome>,
}

/// Starts `job`. Fails only when the cache or journal cannot be opened.
pub fn run_job<'a>(
    job: &'a QueryJob,
    clock: &'a dyn Clock,
    transport: &'a dyn Transport,
    creds: &dyn Credentials,
) -> Result<JobRun<'a>, SchedulerError> {
    job.validate()?;
    let client = ProviderClient::new(
        job.provider.clone(),
        &job.cache_dir,
        job.rate_override,
        job.retry,
        clock,
        transport,
        creds,
    )?;
    let journal = ProgressJournal::open(
        ProgressJournal::path_for(&job.cache_dir, &job.provider.id, &job.label),
        job.resume,
    )?;
    let resumed = job.items.iter().filter(|(id, _)| journal.contains(id)).count();
    client.note_resumed(resumed);
    if resumed > 0 {
        log::info!(
            "{}: resuming, {resumed}/{} items already complete",
            job.provider.id,
            job.items.len()
        );
    }
    Ok(JobRun {
        job,
        client,
        journal,
        next: 0,
        ready: VecDeque::new(),
    })
}

impl<'a> JobRun<'a> {
    pub fn stats(&self) -> JobStats {
        self.client.stats()
    }

    pub fn client(&self) -> &ProviderClient<'a> {
        &self.client
    }

    fn fill(&mut self) {
        let width = self.job.concurrency.max(1);
        let end = (self.next + width).min(self.job.items.len());
        let chunk = &self.job.items[self.next..end];
        self.next = end;
        let client = &self.client;
        let results: Vec<ItemOutcome> = if chunk.len() <= 1 {
            chunk
                .iter()
                .map(|(id, text)| ItemOutcome {
                    id: id.clone(),
                    result: client.query(text),
                })
                .collect()
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|(id, text)| {
                        s.spawn(move || ItemOutcome {
                            id: id.clone(),
                            result: client.query(text),
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("query worker panicked"))
                    .collect()
            })
        };
        for outcome in results {
            if outcome.result.is_ok() {
                if let Err(e) = self.journal.record(&outcome.id) {
                    log::warn!("progress journal: {e}");
                }
            }
            self.ready.push_back(outcome);
        }
    }
}

impl Iterator for JobRun<'_> {
    type Item = ItemOutcome;

    fn next(&mut self) -> Option<ItemOutcome> {
        if self.ready.is_empty() && self.next < self.job.items.len() {
            self.fill();
        }
        self.ready.pop_front()
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.job.items.len() - self.next + self.ready.len();
        (left, Some(left))
    }
}

/// Runs jobs for distinct providers concurrently, one thread per job, and
/// returns each job's outcomes and counters in job order.
pub fn run_jobs(
    jobs: &[(QueryJob, &dyn Transport)],
    clock: &dyn Clock,
    creds: &(dyn Credentials + Sync),
) -> Result<Vec<(Vec<ItemOutcome>, JobStats)>, SchedulerError> {
    std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|(job, transport)| {
                s.spawn(move || {
                    let mut run = run_job(job, clock, *transport, creds)?;
                    let outcomes: Vec<_> = run.by_ref().collect();
                    Ok((outcomes, run.stats()))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("job thread panicked"))
            .collect()
    })
}
