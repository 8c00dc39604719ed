use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which generation path a pipeline runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Re-decode, trajectory-correct and re-encode each window, blend into the
    /// latent buffer and decode it causally.
    #[default]
    Proposed,
    /// Shift the offline model along the stream and keep the last stride of
    /// every window.
    Naive,
    /// One pass over the whole input.
    Offline,
    /// Feed the denoised latent straight into the buffer.
    NoReencode,
    /// Replace the causal buffer decoder with the window decoder applied to the
    /// newest latent; its output overwrites the regenerated history.
    Noncausal,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::Proposed,
        Mode::Naive,
        Mode::Offline,
        Mode::NoReencode,
        Mode::Noncausal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Proposed => "proposed",
            Mode::Naive => "naive",
            Mode::Offline => "offline",
            Mode::NoReencode => "no_reencode",
            Mode::Noncausal => "noncausal",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown mode `{s}`")))
    }
}

/// How the first window is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Warmup {
    /// Wait for a full window of real frames; the first step emits all of it.
    #[default]
    Strict,
    /// Start after one stride of real frames, padding the window in front by
    /// cyclically repeating them.
    Repeat,
}

impl FromStr for Warmup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(Warmup::Strict),
            "repeat" => Ok(Warmup::Repeat),
            other => Err(Error::Argument(format!("unknown warm-up `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Window length `L` in frames.
    pub window: usize,
    /// Stride `Δ` in frames.
    pub stride: usize,
    /// Re-encode length `M` in frames.
    pub reencode: usize,
    /// Latent buffer capacity `K`.
    pub buffer: usize,
    /// Blend weight of the fresh latent.
    pub alpha: f64,
    pub steps: usize,
    pub mode: Mode,
    pub warmup: Warmup,
    /// Frames of history to retain; `None` keeps everything.
    pub retention: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            window: 60,
            stride: 4,
            reencode: 30,
            buffer: 30,
            alpha: 0.8,
            steps: 10,
            mode: Mode::Proposed,
            warmup: Warmup::Strict,
            retention: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::config("stride > 0", "got 0"));
        }
        if self.stride > self.reencode {
            return Err(Error::config(
                "stride ≤ re-encode length",
                format!(
                    "stride {} > re-encode length {}",
                    self.stride, self.reencode
                ),
            ));
        }
        if self.reencode > self.window {
            return Err(Error::config(
                "re-encode length ≤ window length",
                format!(
                    "re-encode length {} > window {}",
                    self.reencode, self.window
                ),
            ));
        }
        if self.buffer == 0 {
            return Err(Error::config("buffer capacity ≥ 1", "got 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(
                "0 ≤ alpha ≤ 1",
                format!("got {}", self.alpha),
            ));
        }
        if self.steps == 0 {
            return Err(Error::config("steps ≥ 1", "got 0"));
        }
        if let Some(r) = self.retention {
            if r < self.window + self.reencode {
                return Err(Error::config(
                    "retention ≥ window + re-encode length",
                    format!("retention {r} < {}", self.window + self.reencode),
                ));
            }
        }
        Ok(())
    }
}
