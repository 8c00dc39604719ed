//! Per-stage wall-clock accounting for pipeline strides.

use std::ops::AddAssign;
use std::time::{Duration, Instant};

use serde::Serialize;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StageTimings {
    pub encode: Duration,
    pub denoise: Duration,
    pub decode: Duration,
    pub reencode: Duration,
    pub causal_decode: Duration,
    pub joints: Duration,
    pub bookkeeping: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.encode
            + self.denoise
            + self.decode
            + self.reencode
            + self.causal_decode
            + self.joints
            + self.bookkeeping
    }

    /// `(name, duration)` pairs in pipeline order.
    pub fn stages(&self) -> [(&'static str, Duration); 7] {
        [
            ("encode", self.encode),
            ("denoise", self.denoise),
            ("decode", self.decode),
            ("reencode", self.reencode),
            ("causal_decode", self.causal_decode),
            ("joints", self.joints),
            ("bookkeeping", self.bookkeeping),
        ]
    }
}

impl AddAssign for StageTimings {
    fn add_assign(&mut self, rhs: Self) {
        self.encode += rhs.encode;
        self.denoise += rhs.denoise;
        self.decode += rhs.decode;
        self.reencode += rhs.reencode;
        self.causal_decode += rhs.causal_decode;
        self.joints += rhs.joints;
        self.bookkeeping += rhs.bookkeeping;
    }
}

/// Lap timer: each call to [`Lap::lap`] returns the time since the previous one.
pub(crate) struct Lap(Instant);

impl Lap {
    pub(crate) fn start() -> Self {
        Self(Instant::now())
    }

    pub(crate) fn lap(&mut self) -> Duration {
        let now = Instant::now();
        let d = now - self.0;
        self.0 = now;
        d
    }
}

/// Nearest-rank percentile of `samples` (`q` in `[0, 1]`); `None` when empty.
pub fn percentile(samples: &[Duration], q: f64) -> Option<Duration> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let rank = ((q.clamp(0.0, 1.0) * sorted.len() as f64).ceil() as usize).max(1);
    Some(sorted[rank - 1])
}
