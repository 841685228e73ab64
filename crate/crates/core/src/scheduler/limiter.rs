use std::collections::VecDeque;
use std::time::Duration;

use super::Clock;

const WINDOW: Duration = Duration::from_secs(1);

/// Token bucket (capacity `ceil(rate)`, refill `rate` per second) combined
/// with a log of recent issue times.
///
/// The bucket alone lets a full burst land right after a partially refilled
/// one, so a window can briefly hold more than `capacity` issues. The log
/// blocks any issue that would put more than `capacity` calls inside one
/// sliding second.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    rate: f64,
    capacity: usize,
    tokens: f64,
    last_refill: Option<Duration>,
    recent: VecDeque<Duration>,
}

impl RateLimiter {
    /// # Panics
    /// If `rate` is not a positive finite number.
    pub fn new(rate: f64) -> Self {
        assert!(rate.is_finite() && rate > 0.0, "rate must be positive");
        let capacity = rate.ceil() as usize;
        Self {
            rate,
            capacity,
            tokens: capacity as f64,
            last_refill: None,
            recent: VecDeque::with_capacity(capacity),
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Most calls allowed inside any 1 second window.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Takes a permit at time `now` or returns how long to wait first.
    pub fn try_acquire(&mut self, now: Duration) -> Result<(), Duration> {
        if let Some(last) = self.last_refill {
            let dt = now.saturating_sub(last).as_secs_f64();
            self.tokens = (self.tokens + dt * self.rate).min(self.capacity as f64);
        }
        self.last_refill = Some(now);
        while self
            .recent
            .front()
            .is_some_and(|&t| now.saturating_sub(t) >= WINDOW)
        {
            self.recent.pop_front();
        }
        let bucket_wait = if self.tokens >= 1.0 - 1e-9 {
            Duration::ZERO
        } else {
            Duration::from_secs_f64((1.0 - self.tokens) / self.rate)
        };
        let window_wait = if self.recent.len() < self.capacity {
            Duration::ZERO
        } else {
            (self.recent[0] + WINDOW).saturating_sub(now)
        };
        let wait = bucket_wait.max(window_wait);
        if wait.is_zero() {
            self.tokens = (self.tokens - 1.0).max(0.0);
            self.recent.push_back(now);
            Ok(())
        } else {
            Err(wait.max(Duration::from_nanos(1)))
        }
    }

    /// Blocks on `clock` until a permit is available; returns the issue time.
    pub fn acquire(&mut self, clock: &dyn Clock) -> Duration {
        loop {
            let now = clock.now();
            match self.try_acquire(now) {
                Ok(()) => return now,
                Err(wait) => clock.sleep(wait),
            }
        }
    }
}

/// Largest number of `issues` (sorted) within any half-open 1 second window.
pub fn max_issues_per_window(issues: &[Duration]) -> usize {
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..issues.len() {
        while issues[hi] - issues[lo] >= WINDOW {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}
