//! The streaming stylization state machine.
//!
//! Frames are indexed on a *virtual* timeline: in [`Warmup::Repeat`] mode the
//! stream is prefixed by `L - Δ` synthesized frames, in strict mode virtual and
//! real indices coincide. Each stride processes the window `[t, t + L)`:
//!
//! 1. encode the input window, denoise it under the current style;
//! 2. decode it and splice its last `Δ` frames after the stylized history,
//!    restoring the input trajectory;
//! 3. re-encode the last `M` frames of that intermediate sequence and blend
//!    the result with the newest buffered latent;
//! 4. push the blended latent into the bounded buffer and decode the buffer
//!    causally into the last `M` frames;
//! 5. splice the last `Δ` of those after the history, restore the trajectory
//!    and emit their joints.
//!
//! The first stride seeds the history with the trajectory-corrected decode of
//! the first window and emits every real frame of that window.

mod config;
mod offline;

use std::ops::Range;
use std::sync::Arc;

use crate::backend::{BackendDescriptor, Conditioning, MotionBackend, StyleEmbedding};
use crate::error::{Error, Result};
use crate::latent::{blend, LatentBuffer};
use crate::motion::{JointSequence, MotionSequence, TRAJ_DIMS};
use crate::timing::{Lap, StageTimings};

pub use config::{Mode, PipelineConfig, Warmup};
pub use offline::{run_naive_baseline, run_offline};

/// Frames with absolute indices `offset..offset + len`, oldest dropped first.
#[derive(Debug, Clone)]
struct FrameHistory {
    d: usize,
    offset: usize,
    data: Vec<f64>,
}

impl FrameHistory {
    fn new(d: usize) -> Self {
        Self {
            d,
            offset: 0,
            data: Vec::new(),
        }
    }

    fn end(&self) -> usize {
        self.offset + self.data.len() / self.d
    }

    fn retained(&self) -> usize {
        self.data.len() / self.d
    }

    fn push(&mut self, rows: &[f64]) {
        debug_assert_eq!(rows.len() % self.d, 0);
        self.data.extend_from_slice(rows);
    }

    fn rows(&self, range: Range<usize>) -> &[f64] {
        assert!(
            range.start >= self.offset && range.end <= self.end(),
            "frames {range:?} not retained ({}..{})",
            self.offset,
            self.end()
        );
        let (a, b) = (range.start - self.offset, range.end - self.offset);
        &self.data[a * self.d..b * self.d]
    }

    fn truncate(&mut self, end: usize) {
        assert!(end >= self.offset, "cannot truncate into dropped history");
        self.data
            .truncate((end - self.offset).min(self.retained()) * self.d);
    }

    fn drop_before(&mut self, abs: usize) {
        let n = abs.saturating_sub(self.offset).min(self.retained());
        self.data.drain(..n * self.d);
        self.offset += n;
    }
}

fn restore_trajectory(rows: &mut [f64], source: &[f64], d: usize) {
    for (dst, src) in rows.chunks_exact_mut(d).zip(source.chunks_exact(d)) {
        dst[..TRAJ_DIMS].copy_from_slice(&src[..TRAJ_DIMS]);
    }
}

/// Frames emitted by one call into the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Emission {
    /// Real index of the first emitted frame.
    pub start: usize,
    pub features: MotionSequence,
    pub joints: JointSequence,
    pub strides: usize,
    /// Leading frames of this emission that belong to the warm-up phase.
    pub warmup_frames: usize,
}

impl Emission {
    fn empty(start: usize, d: usize, fps: f64, joints: usize) -> Self {
        Self {
            start,
            features: MotionSequence::from_parts_unchecked(d, fps, Vec::new()),
            joints: JointSequence::empty(joints),
            strides: 0,
            warmup_frames: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.joints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }
}

/// Sizes of everything the pipeline keeps between strides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Footprint {
    pub pending: usize,
    pub backlog: usize,
    pub history: usize,
    pub buffer: usize,
    pub joints: usize,
}

/// Mutable streaming state. Single-owner: not safe for concurrent mutation,
/// but can be moved between threads.
#[derive(Debug)]
pub struct PipelineState {
    config: PipelineConfig,
    backend: Arc<dyn MotionBackend>,
    desc: BackendDescriptor,
    fps: f64,
    style: StyleEmbedding,
    pending: Vec<f64>,
    backlog: FrameHistory,
    history: FrameHistory,
    buffer: LatentBuffer,
    joints: JointSequence,
    joints_offset: usize,
    pad_len: usize,
    started: bool,
    finished: bool,
    cursor: usize,
    strides: usize,
    frames_in: usize,
    emitted: usize,
    warmup_emitted: usize,
    timings: StageTimings,
    last_timings: StageTimings,
}

impl PipelineState {
    pub fn new(
        config: PipelineConfig,
        backend: Arc<dyn MotionBackend>,
        initial_style: StyleEmbedding,
    ) -> Result<Self> {
        config.validate()?;
        if config.mode == Mode::Offline {
            return Err(Error::config(
                "streaming mode",
                "offline mode is a single batch pass; use run_offline",
            ));
        }
        let desc = backend.descriptor().clone();
        if config.window > desc.max_window || config.window != desc.decode_len {
            return Err(Error::config(
                "window length = backend decode length",
                format!(
                    "window {} vs decode length {} (max window {})",
                    config.window, desc.decode_len, desc.max_window
                ),
            ));
        }
        if initial_style.dim() != desc.style_dim {
            return Err(Error::dim(
                "style embedding",
                desc.style_dim,
                initial_style.dim(),
            ));
        }
        let d = desc.frame_width;
        Ok(Self {
            buffer: LatentBuffer::new(config.buffer),
            joints: JointSequence::empty(desc.joint_count),
            pad_len: 0,
            started: config.warmup == Warmup::Strict,
            pending: Vec::new(),
            backlog: FrameHistory::new(d),
            history: FrameHistory::new(d),
            fps: crate::motion::DEFAULT_FPS,
            style: initial_style,
            finished: false,
            joints_offset: 0,
            cursor: 0,
            strides: 0,
            frames_in: 0,
            emitted: 0,
            warmup_emitted: 0,
            timings: StageTimings::default(),
            last_timings: StageTimings::default(),
            config,
            backend,
            desc,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn backend(&self) -> &Arc<dyn MotionBackend> {
        &self.backend
    }

    pub fn style(&self) -> &StyleEmbedding {
        &self.style
    }

    /// Start of the next window on the virtual timeline.
    pub fn cursor(&self) -> usize {
        self.cursor
    }

    /// Virtual index of the first real frame.
    pub fn pad_len(&self) -> usize {
        self.pad_len
    }

    pub fn strides(&self) -> usize {
        self.strides
    }

    pub fn frames_in(&self) -> usize {
        self.frames_in
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    pub fn warmup_emitted(&self) -> usize {
        self.warmup_emitted
    }

    pub fn buffer(&self) -> &LatentBuffer {
        &self.buffer
    }

    /// Retained emitted joints and the real index of the first one.
    pub fn joints(&self) -> (usize, &JointSequence) {
        (self.joints_offset, &self.joints)
    }

    /// Retained stylized feature history (real frames only) and the real
    /// index of its first frame. Unlike emitted joints, the noncausal
    /// ablation rewrites the tail of this history.
    pub fn history(&self) -> (usize, MotionSequence) {
        let from = self
            .history
            .offset
            .max(self.pad_len)
            .min(self.history.end());
        let rows = self.history.rows(from..self.history.end()).to_vec();
        (
            from - self.pad_len,
            MotionSequence::from_parts_unchecked(self.desc.frame_width, self.fps, rows),
        )
    }

    pub fn footprint(&self) -> Footprint {
        Footprint {
            pending: self.pending.len() / self.desc.frame_width,
            backlog: self.backlog.retained(),
            history: self.history.retained(),
            buffer: self.buffer.len(),
            joints: self.joints.len(),
        }
    }

    /// Accumulated per-stage time over all strides.
    pub fn timings(&self) -> StageTimings {
        self.timings
    }

    pub fn last_timings(&self) -> StageTimings {
        self.last_timings
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Switches the style used by every subsequent stride.
    pub fn set_style(&mut self, style: StyleEmbedding) -> Result<()> {
        if style.dim() != self.desc.style_dim {
            return Err(Error::dim(
                "style embedding",
                self.desc.style_dim,
                style.dim(),
            ));
        }
        self.style = style;
        Ok(())
    }

    /// Appends frames to the input and runs every stride that became possible.
    pub fn push_frames(&mut self, frames: &MotionSequence) -> Result<Emission> {
        if self.finished {
            return Err(Error::Argument("pipeline already finished".into()));
        }
        let d = self.desc.frame_width;
        if frames.width() != d {
            return Err(Error::dim("frame width", d, frames.width()));
        }
        if self.frames_in == 0 {
            self.fps = frames.fps();
        }
        self.frames_in += frames.len();
        if self.started {
            self.backlog.push(frames.as_flat());
        } else {
            self.pending.extend_from_slice(frames.as_flat());
            if self.pending.len() / d >= self.config.stride {
                self.start_repeat(self.config.stride);
            }
        }

        let mut out = Emission::empty(self.emitted, d, self.fps, self.desc.joint_count);
        while self.started && self.backlog.end() >= self.cursor + self.config.window {
            let advance = self.config.stride;
            self.step(advance, &mut out)?;
        }
        self.apply_retention();
        Ok(out)
    }

    /// Flushes a trailing partial stride and closes the stream.
    ///
    /// Frames that never completed a stride are processed by one final step
    /// whose window ends at the last input frame. Streams shorter than one
    /// window (strict warm-up) produce nothing.
    pub fn finish(&mut self) -> Result<Emission> {
        let d = self.desc.frame_width;
        let mut out = Emission::empty(self.emitted, d, self.fps, self.desc.joint_count);
        if self.finished {
            return Ok(out);
        }
        self.finished = true;
        let l = self.config.window;
        if !self.started {
            let n = self.pending.len() / d;
            if n == 0 {
                return Ok(out);
            }
            self.start_repeat(n);
            self.step(n, &mut out)?;
        } else if self.strides > 0 {
            let processed_end = self.cursor - self.config.stride + l;
            let rest = self.backlog.end() - processed_end;
            if rest > 0 {
                self.cursor = self.backlog.end() - l;
                self.step(rest, &mut out)?;
            }
        }
        Ok(out)
    }

    /// Seeds the virtual timeline with `L - n` frames repeating the first `n`.
    fn start_repeat(&mut self, n: usize) {
        let d = self.desc.frame_width;
        let pad_len = self.config.window - n;
        let mut pad = Vec::with_capacity(pad_len * d);
        for v in 0..pad_len {
            let src = (v as isize - pad_len as isize).rem_euclid(n as isize) as usize;
            pad.extend_from_slice(&self.pending[src * d..(src + 1) * d]);
        }
        self.backlog.push(&pad);
        self.backlog.push(&self.pending);
        self.pending = Vec::new();
        self.pad_len = pad_len;
        self.started = true;
    }

    fn step(&mut self, advance: usize, out: &mut Emission) -> Result<()> {
        let stride = self.strides;
        self.step_inner(advance, out).map_err(|e| Error::Stride {
            stride,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self, advance: usize, out: &mut Emission) -> Result<()> {
        let cfg = self.config.clone();
        let (l, m) = (cfg.window, cfg.reencode);
        let d = self.desc.frame_width;
        let t = self.cursor;
        let end = t + l;
        let first = self.strides == 0;
        let backend = Arc::clone(&self.backend);
        let mut timings = StageTimings::default();
        let mut lap = Lap::start();

        let input = self.backlog.rows(t..end).to_vec();
        let window = MotionSequence::from_parts_unchecked(d, self.fps, input);
        timings.bookkeeping += lap.lap();

        let z = backend.encode(&window)?;
        timings.encode = lap.lap();
        let cond =
            Conditioning::from_window(&window, &self.style, cfg.steps, stride_nonce(self.strides));
        let z_tilde = backend.denoise(&z, &cond)?;
        timings.denoise = lap.lap();

        let decoded = if first || cfg.mode != Mode::NoReencode {
            Some(backend.decode(&z_tilde)?)
        } else {
            None
        };
        timings.decode = lap.lap();

        if first {
            let decoded = decoded.as_ref().expect("decoded on first stride");
            let mut seed = decoded.as_flat()[..(l - advance) * d].to_vec();
            restore_trajectory(&mut seed, window.as_flat(), d);
            self.history.truncate(t);
            self.history.push(&seed);
        }
        debug_assert_eq!(self.history.end(), end - advance);
        // decoded rows covering virtual positions [end - advance, end)
        let fresh_tail = |dec: &MotionSequence| dec.as_flat()[(l - advance) * d..].to_vec();
        timings.bookkeeping += lap.lap();

        let (splice_start, mut new_rows) = match cfg.mode {
            Mode::Naive => {
                let rows = fresh_tail(decoded.as_ref().expect("naive decodes"));
                (end - advance, rows)
            }
            Mode::Proposed | Mode::Noncausal | Mode::NoReencode => {
                let latent = if cfg.mode == Mode::NoReencode {
                    z_tilde
                } else {
                    let mut tail = self.history.rows(end - m..end - advance).to_vec();
                    let mut fresh = fresh_tail(decoded.as_ref().expect("decoded"));
                    restore_trajectory(&mut fresh, &window.as_flat()[(l - advance) * d..], d);
                    tail.extend_from_slice(&fresh);
                    let intermediate = MotionSequence::from_parts_unchecked(d, self.fps, tail);
                    let z_new = backend.encode(&intermediate)?;
                    let z_cur = blend(&z_new, self.buffer.newest(), cfg.alpha)?;
                    timings.reencode = lap.lap();
                    z_cur
                };
                self.buffer.push(latent);
                let result = if cfg.mode == Mode::Noncausal {
                    let dec = backend.decode(self.buffer.newest().expect("just pushed"))?;
                    (end - m, dec.as_flat()[(l - m) * d..].to_vec())
                } else {
                    let dec = backend.causal_decode(self.buffer.as_slice(), m)?;
                    (end - advance, dec.as_flat()[(m - advance) * d..].to_vec())
                };
                timings.causal_decode = lap.lap();
                result
            }
            Mode::Offline => unreachable!("rejected at construction"),
        };

        restore_trajectory(&mut new_rows, self.backlog.rows(splice_start..end), d);
        self.history.truncate(splice_start);
        self.history.push(&new_rows);

        let emit_from = if first {
            self.pad_len
        } else {
            (end - advance).max(self.pad_len)
        };
        let emit_rows = self.history.rows(emit_from..end).to_vec();
        let features = MotionSequence::from_parts_unchecked(d, self.fps, emit_rows);
        timings.bookkeeping += lap.lap();
        let joints = backend.features_to_joints(&features)?;
        timings.joints = lap.lap();

        let count = end - emit_from;
        let warmup = first || t < self.pad_len;
        if warmup {
            self.warmup_emitted += count;
            if out.warmup_frames == out.joints.len() {
                out.warmup_frames += count;
            }
        }
        self.joints.append(&joints)?;
        out.joints.append(&joints)?;
        out.features = out.features.concat(&features)?;
        out.strides += 1;
        self.emitted += count;
        self.cursor += advance;
        self.strides += 1;
        timings.bookkeeping += lap.lap();
        self.last_timings = timings;
        self.timings += timings;
        Ok(())
    }

    fn apply_retention(&mut self) {
        let Some(keep) = self.config.retention else {
            return;
        };
        let backlog_from = self.backlog.end().saturating_sub(keep).min(self.cursor);
        self.backlog.drop_before(backlog_from);
        self.history
            .drop_before(self.history.end().saturating_sub(keep));
        let excess = self.joints.len().saturating_sub(keep);
        self.joints.drop_front(excess);
        self.joints_offset += excess;
    }
}

/// Noise stream for a stride; identical across modes so paired runs share noise.
fn stride_nonce(stride: usize) -> u64 {
    stride as u64
}
