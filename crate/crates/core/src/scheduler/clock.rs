use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

/// Time source used for rate limiting, backoff and timestamps.
pub trait Clock: Send + Sync {
    /// Monotonic time since an arbitrary origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
    /// Wall-clock Unix epoch milliseconds.
    fn unix_ms(&self) -> u64;
}

/// Real time.
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }

    fn unix_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Virtual time. `sleep` advances the clock instantly and is recorded.
#[derive(Debug, Default)]
pub struct SimClock {
    state: Mutex<SimState>,
    epoch_ms: u64,
}

#[derive(Debug, Default)]
struct SimState {
    now: Duration,
    sleeps: Vec<Duration>,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    /// A clock whose `unix_ms` starts at `epoch_ms`.
    pub fn starting_at(epoch_ms: u64) -> Self {
        Self {
            state: Mutex::default(),
            epoch_ms,
        }
    }

    pub fn advance(&self, d: Duration) {
        self.state.lock().unwrap().now += d;
    }

    /// Every sleep requested so far, in order.
    pub fn sleeps(&self) -> Vec<Duration> {
        self.state.lock().unwrap().sleeps.clone()
    }
}

impl Clock for SimClock {
    fn now(&self) -> Duration {
        self.state.lock().unwrap().now
    }

    fn sleep(&self, d: Duration) {
        let mut s = self.state.lock().unwrap();
        s.now += d;
        s.sleeps.push(d);
    }

    fn unix_ms(&self) -> u64 {
        self.epoch_ms + self.now().as_millis() as u64
    }
}
