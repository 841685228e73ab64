use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Clock, ItemError, RateLimiter, ResponseCache, SchedulerError, Transport};
use crate::providers::{decode_response, encode_request, Credentials, ProviderResponse, ProviderSpec};

/// Exponential backoff for transient failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub base: Duration,
    pub factor: u32,
    /// Total attempts per item, first try included.
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base: Duration::from_secs(1),
            factor: 2,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `retry` (1-based).
    pub fn delay(&self, retry: u32) -> Duration {
        self.base * self.factor.saturating_pow(retry.saturating_sub(1))
    }
}

/// Counters for one client or job.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobStats {
    pub transport_calls: usize,
    pub cache_hits: usize,
    pub retries: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Items already listed in the progress journal when the job started.
    pub resumed: usize,
}

/// Rate-limited, retrying, caching access to one provider.
///
/// Safe to share between threads; the cache and limiter are each behind a
/// mutex so appends and permit grants are serialized.
pub struct ProviderClient<'a> {
    spec: ProviderSpec,
    retry: RetryPolicy,
    clock: &'a dyn Clock,
    transport: &'a dyn Transport,
    creds: BTreeMap<String, String>,
    cache: Mutex<ResponseCache>,
    limiter: Mutex<RateLimiter>,
    stats: Mutex<JobStats>,
    issued: Mutex<Vec<Duration>>,
}

impl<'a> ProviderClient<'a> {
    pub fn new(
        spec: ProviderSpec,
        cache_dir: &Path,
        rate_override: Option<f64>,
        retry: RetryPolicy,
        clock: &'a dyn Clock,
        transport: &'a dyn Transport,
        creds: &dyn Credentials,
    ) -> Result<Self, SchedulerError> {
        let rate = rate_override.unwrap_or(spec.rate_limit);
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SchedulerError::InvalidRate(rate));
        }
        if retry.max_attempts == 0 {
            return Err(SchedulerError::InvalidRetry);
        }
        let cache = ResponseCache::open(cache_dir, &spec.id)?;
        let creds = spec
            .auth_env_var
            .iter()
            .filter_map(|var| creds.get(var).map(|v| (var.clone(), v)))
            .collect();
        Ok(Self {
            spec,
            retry,
            clock,
            transport,
            creds,
            cache: Mutex::new(cache),
            limiter: Mutex::new(RateLimiter::new(rate)),
            stats: Mutex::default(),
            issued: Mutex::default(),
        })
    }

    pub fn spec(&self) -> &ProviderSpec {
        &self.spec
    }

    pub fn stats(&self) -> JobStats {
        *self.stats.lock().unwrap()
    }

    /// Clock times at which transport calls were issued.
    pub fn issue_times(&self) -> Vec<Duration> {
        self.issued.lock().unwrap().clone()
    }

    pub(crate) fn note_resumed(&self, n: usize) {
        self.stats.lock().unwrap().resumed += n;
    }

    /// Cached response for `text`, if any; does not touch the network.
    pub fn cached(&self, text: &str) -> Option<ProviderResponse> {
        self.cache.lock().unwrap().get(text).cloned()
    }

    /// Scores `text`, from cache when possible.
    pub fn query(&self, text: &str) -> Result<ProviderResponse, ItemError> {
        let out = self.query_inner(text);
        let mut stats = self.stats.lock().unwrap();
        match out {
            Ok(_) => stats.succeeded += 1,
            Err(_) => stats.failed += 1,
        }
        out
    }

    fn query_inner(&self, text: &str) -> Result<ProviderResponse, ItemError> {
        if let Some(hit) = self.cached(text) {
            self.stats.lock().unwrap().cache_hits += 1;
            return Ok(hit);
        }
        let req = encode_request(&self.spec, text, &self.creds).map_err(ItemError::Provider)?;
        let mut attempt = 1;
        loop {
            self.wait_for_permit();
            let started = self.clock.now();
            self.stats.lock().unwrap().transport_calls += 1;
            let sent = self.transport.send(&req);
            let latency_ms = (self.clock.now() - started).as_secs_f64() * 1000.0;
            match sent {
                Ok(reply) => {
                    let mut resp = decode_response(&self.spec, &reply.body)
                        .map_err(ItemError::Provider)?
                        .stamped(text, latency_ms, self.clock.unix_ms());
                    if resp.model_version.is_none() {
                        resp.model_version = reply.model_version;
                    }
                    self.cache
                        .lock()
                        .unwrap()
                        .put(text, &resp)
                        .map_err(|e| ItemError::CacheWrite(e.to_string()))?;
                    return Ok(resp);
                }
                Err(e) if e.is_transient() && attempt < self.retry.max_attempts => {
                    log::debug!("{}: attempt {attempt} failed: {e}", self.spec.id);
                    self.clock.sleep(self.retry.delay(attempt));
                    self.stats.lock().unwrap().retries += 1;
                    attempt += 1;
                }
                Err(e) if e.is_transient() => {
                    return Err(ItemError::RetriesExhausted {
                        attempts: attempt,
                        last: e.to_string(),
                    })
                }
                Err(e) => return Err(ItemError::Transport(e)),
            }
        }
    }

    fn wait_for_permit(&self) {
        loop {
            let now = self.clock.now();
            let granted = self.limiter.lock().unwrap().try_acquire(now);
            match granted {
                Ok(()) => {
                    self.issued.lock().unwrap().push(now);
                    return;
                }
                Err(wait) => self.clock.sleep(wait),
            }
        }
    }
}

impl std::fmt::Debug for ProviderClient<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProviderClient")
            .field("provider", &self.spec.id)
            .field("retry", &self.retry)
            .field("stats", &self.stats())
            .finish_non_exhaustive()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{MockLexicon, MockTransport, WireRequest};
    use crate::scheduler::{SimClock, TransportError, TransportResponse};
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Fails transiently `failures` times, then answers 0.4.
    struct Flaky {
        failures: usize,
        calls: AtomicUsize,
    }

    impl Transport for Flaky {
        fn send(&self, _: &WireRequest) -> Result<TransportResponse, TransportError> {
            let n = self.calls.fetch_add(1, Ordering::SeqCst);
            if n < self.failures {
                Err(TransportError::Transient("503".into()))
            } else {
                Ok(TransportResponse {
                    body: br#"{"toxicity":0.4}"#.to_vec(),
                    model_version: None,
                })
            }
        }
    }

    fn client<'a>(dir: &Path, clock: &'a SimClock, t: &'a dyn Transport) -> ProviderClient<'a> {
        ProviderClient::new(
            ProviderSpec::mock(),
            dir,
            None,
            RetryPolicy::default(),
            clock,
            t,
            &BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn backoff_one_then_two_seconds() {
        let dir = tempfile::tempdir().unwrap();
        let clock = SimClock::new();
        let flaky = Flaky {
            failures: 2,
            calls: AtomicUsize::new(0),
        };
        let c = client(dir.path(), &clock, &flaky);
        let r = c.query("x").unwrap();
        assert_eq!(r.category_scores["toxicity"], 0.4);
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 3);
        assert_eq!(clock.sleeps(), vec![Duration::from_secs(1), Duration::from_secs(2)]);
        assert_eq!(c.stats().retries, 2);
    }

    #[test]
    fn exhausted_after_five_attempts() {
        let dir = tempfile::tempdir().unwrap();
        let clock = SimClock::new();
        let flaky = Flaky {
            failures: 100,
            calls: AtomicUsize::new(0),
        };
        let c = client(dir.path(), &clock, &flaky);
        let err = c.query("x").unwrap_err();
        assert!(matches!(err, ItemError::RetriesExhausted { attempts: 5, .. }));
        assert_eq!(flaky.calls.load(Ordering::SeqCst), 5);
        assert_eq!(clock.now(), Duration::from_secs(1 + 2 + 4 + 8));
    }

    #[test]
    fn auth_is_not_retried() {
        struct Denied;
        impl Transport for Denied {
            fn send(&self, _: &WireRequest) -> Result<TransportResponse, TransportError> {
                Err(TransportError::Auth("401".into()))
            }
        }
        let dir = tempfile::tempdir().unwrap();
        let clock = SimClock::new();
        let c = client(dir.path(), &clock, &Denied);
        assert!(matches!(c.query("x"), Err(ItemError::Transport(TransportError::Auth(_)))));
        assert_eq!(c.stats().transport_calls, 1);
    }

    #[test]
    fn second_query_hits_cache() {
        let dir = tempfile::tempdir().unwrap();
        let clock = SimClock::new();
        let t = MockTransport::new(MockLexicon::new(0.1));
        let c = client(dir.path(), &clock, &t);
        let a = c.query("same").unwrap();
        let b = c.query("same").unwrap();
        assert_eq!(a, b);
        assert_eq!(t.calls(), 1);
        assert_eq!(c.stats().cache_hits, 1);
    }

    #[test]
    fn missing_credential_is_item_error() {
        let dir = tempfile::tempdir().unwrap();
        let clock = SimClock::new();
        let t = MockTransport::new(MockLexicon::new(0.1));
        let mut spec = ProviderSpec::mock();
        spec.auth_env_var = Some("MODAUDIT_MOCK_KEY".into());
        let c = ProviderClient::new(
            spec,
            dir.path(),
            None,
            RetryPolicy::default(),
            &clock,
            &t,
            &BTreeMap::new(),
        )
        .unwrap();
        let err = c.query("x").unwrap_err();
        assert!(err.to_string().contains("MODAUDIT_MOCK_KEY"));
        assert_eq!(t.calls(), 0);
    }
}
