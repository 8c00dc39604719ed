use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Monotonic time source used for latency accounting.
pub trait Clock: Send + Sync + fmt::Debug {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Duration;
}

#[derive(Debug)]
pub struct SystemClock(Instant);

impl Default for SystemClock {
    fn default() -> Self {
        Self(Instant::now())
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.0.elapsed()
    }
}

/// Deterministic clock: every reading advances time by `tick`, and tests can
/// jump it forward with [`ManualClock::advance`].
#[derive(Debug, Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
    tick: Duration,
}

impl ManualClock {
    pub fn new(tick: Duration) -> Self {
        Self {
            now: Mutex::new(Duration::ZERO),
            tick,
        }
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().expect("clock poisoned") += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        let mut now = self.now.lock().expect("clock poisoned");
        let t = *now;
        *now += self.tick;
        t
    }
}
