//! Motion feature frames, sequences and joint sequences.
//!
//! A frame is a `d`-dimensional feature vector whose first three entries hold
//! the root trajectory; the remaining `d - 3` entries are local (stylizable)
//! features. Sequences store frames row-major in one flat buffer.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of leading feature dimensions holding the root trajectory.
pub const TRAJ_DIMS: usize = 3;

/// Smallest admissible frame width: trajectory plus one local feature.
pub const MIN_FRAME_WIDTH: usize = TRAJ_DIMS + 1;

pub const DEFAULT_FPS: f64 = 20.0;

pub const DEFAULT_JOINT_COUNT: usize = 22;

fn check_finite(values: &[f64], what: &'static str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_width(d: usize) -> Result<()> {
    if d < MIN_FRAME_WIDTH {
        return Err(Error::dim("frame width (minimum)", MIN_FRAME_WIDTH, d));
    }
    Ok(())
}

/// A single motion feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MotionFrame(Vec<f64>);

impl MotionFrame {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_width(values.len())?;
        check_finite(&values, "motion frame")?;
        Ok(Self(values))
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for MotionFrame {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<MotionFrame> for Vec<f64> {
    fn from(frame: MotionFrame) -> Self {
        frame.0
    }
}

/// Splits a frame into its root trajectory and local features.
pub fn decompose(frame: &[f64]) -> Result<([f64; TRAJ_DIMS], Vec<f64>)> {
    check_width(frame.len())?;
    let traj = [frame[0], frame[1], frame[2]];
    Ok((traj, frame[TRAJ_DIMS..].to_vec()))
}

/// Inverse of [`decompose`].
pub fn recompose(traj: &[f64; TRAJ_DIMS], feat: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(TRAJ_DIMS + feat.len());
    out.extend_from_slice(traj);
    out.extend_from_slice(feat);
    out
}

/// An ordered run of motion frames sharing one width.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    d: usize,
    fps: f64,
    data: Vec<f64>,
}

impl MotionSequence {
    pub fn empty(d: usize, fps: f64) -> Result<Self> {
        Self::from_flat(d, fps, Vec::new())
    }

    /// Builds a sequence from a row-major buffer of `len * d` values.
    pub fn from_flat(d: usize, fps: f64, data: Vec<f64>) -> Result<Self> {
        check_width(d)?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Argument(format!("fps must be positive, got {fps}")));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::dim("flat frame buffer", d, data.len() % d));
        }
        check_finite(&data, "motion sequence")?;
        Ok(Self { d, fps, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(d: usize, fps: f64, rows: &[R]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * d);
        for row in rows {
            let row = row.as_ref();
            if row.len() != d {
                return Err(Error::dim("frame width", d, row.len()));
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(d, fps, data)
    }

    pub fn from_frames(fps: f64, frames: &[MotionFrame]) -> Result<Self> {
        let d = frames
            .first()
            .map(MotionFrame::width)
            .unwrap_or(MIN_FRAME_WIDTH);
        Self::from_rows(
            d,
            fps,
            frames
                .iter()
                .map(MotionFrame::values)
                .collect::<Vec<_>>()
                .as_slice(),
        )
    }

    /// Construction path for values already known to be valid.
    pub(crate) fn from_parts_unchecked(d: usize, fps: f64, data: Vec<f64>) -> Self {
        debug_assert!(d >= MIN_FRAME_WIDTH && data.len().is_multiple_of(d));
        Self { d, fps, data }
    }

    pub fn width(&self) -> usize {
        self.d
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.data
    }

    pub fn trajectory(&self, i: usize) -> [f64; TRAJ_DIMS] {
        let f = self.frame(i);
        [f[0], f[1], f[2]]
    }

    pub fn trajectories(&self) -> Vec<[f64; TRAJ_DIMS]> {
        (0..self.len()).map(|i| self.trajectory(i)).collect()
    }

    /// Local (non-trajectory) features of every frame, row-major.
    pub fn local_features(&self) -> Vec<f64> {
        self.frames()
            .flat_map(|f| f[TRAJ_DIMS..].iter().copied())
            .collect()
    }

    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.len() {
            return Err(Error::bounds(format!(
                "frames {}..{} of a {}-frame sequence",
                range.start,
                range.end,
                self.len()
            )));
        }
        Ok(Self::from_parts_unchecked(
            self.d,
            self.fps,
            self.data[range.start * self.d..range.end * self.d].to_vec(),
        ))
    }

    pub fn concat(&self, other: &MotionSequence) -> Result<Self> {
        if other.d != self.d {
            return Err(Error::dim("frame width", self.d, other.d));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self::from_parts_unchecked(self.d, self.fps, data))
    }
}

/// Returns `target` with the trajectory of every frame in `range` replaced by
/// the corresponding trajectory of `source`.
pub fn copy_trajectory(
    target: &MotionSequence,
    source: &MotionSequence,
    range: Range<usize>,
) -> Result<MotionSequence> {
    if target.d != source.d {
        return Err(Error::dim("frame width", target.d, source.d));
    }
    if range.start > range.end || range.end > target.len() || range.end > source.len() {
        return Err(Error::bounds(format!(
            "trajectory range {}..{} exceeds target ({}) or source ({})",
            range.start,
            range.end,
            target.len(),
            source.len()
        )));
    }
    let mut data = target.data.clone();
    let d = target.d;
    for t in range {
        data[t * d..t * d + TRAJ_DIMS].copy_from_slice(&source.data[t * d..t * d + TRAJ_DIMS]);
    }
    Ok(MotionSequence::from_parts_unchecked(d, target.fps, data))
}

/// Frames `[start, min(start + len, seq.len()))`.
pub fn window_at(seq: &MotionSequence, start: usize, len: usize) -> Result<MotionSequence> {
    if start >= seq.len() {
        return Err(Error::bounds(format!(
            "window start {start} beyond sequence of {} frames",
            seq.len()
        )));
    }
    if len == 0 {
        return Err(Error::Argument("window length must be positive".into()));
    }
    seq.slice(start..(start + len).min(seq.len()))
}

/// Appends the last `keep_new` frames of `new_window` to `prev`.
pub fn splice(
    prev: &MotionSequence,
    new_window: &MotionSequence,
    keep_new: usize,
) -> Result<MotionSequence> {
    if keep_new > new_window.len() {
        return Err(Error::Argument(format!(
            "cannot keep {keep_new} frames of a {}-frame window",
            new_window.len()
        )));
    }
    let tail = new_window.slice(new_window.len() - keep_new..new_window.len())?;
    prev.concat(&tail)
}

/// Per-frame `J x 3` joint positions.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSequence {
    joints: usize,
    data: Vec<f64>,
}

impl JointSequence {
    pub fn empty(joints: usize) -> Self {
        assert!(joints > 0, "joint count must be positive");
        Self {
            joints,
            data: Vec::new(),
        }
    }

    /// Builds from a flat buffer of `frames * joints * 3` values.
    pub fn from_flat(joints: usize, data: Vec<f64>) -> Result<Self> {
        if joints == 0 {
            return Err(Error::Argument("joint count must be positive".into()));
        }
        let stride = joints * 3;
        if !data.len().is_multiple_of(stride) {
            return Err(Error::dim(
                "joint frame buffer",
                stride,
                data.len() % stride,
            ));
        }
        check_finite(&data, "joint sequence")?;
        Ok(Self { joints, data })
    }

    pub fn from_frames(joints: usize, frames: &[Vec<[f64; 3]>]) -> Result<Self> {
        let mut data = Vec::with_capacity(frames.len() * joints * 3);
        for frame in frames {
            if frame.len() != joints {
                return Err(Error::dim("joints per frame", joints, frame.len()));
            }
            data.extend(frame.iter().flatten());
        }
        Self::from_flat(joints, data)
    }

    pub fn joint_count(&self) -> usize {
        self.joints
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.joints * 3)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// The `J * 3` coordinates of frame `t`.
    pub fn frame(&self, t: usize) -> &[f64] {
        let s = self.joints * 3;
        &self.data[t * s..(t + 1) * s]
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let f = self.frame(t);
        [f[3 * j], f[3 * j + 1], f[3 * j + 2]]
    }

    pub fn frames(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.joints * 3)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn slice(&self, range: Range<usize>) -> Result<Self> {
        if range.start > range.end || range.end > self.len() {
            return Err(Error::bounds(format!(
                "joint frames {}..{} of {}",
                range.start,
                range.end,
                self.len()
            )));
        }
        let s = self.joints * 3;
        Ok(Self {
            joints: self.joints,
            data: self.data[range.start * s..range.end * s].to_vec(),
        })
    }

    /// Frames from `start` to the end; empty if `start` is past the end.
    pub fn tail_from(&self, start: usize) -> Self {
        let start = start.min(self.len());
        self.slice(start..self.len()).expect("in range")
    }

    pub fn append(&mut self, other: &JointSequence) -> Result<()> {
        if other.joints != self.joints {
            return Err(Error::dim("joint count", self.joints, other.joints));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub(crate) fn drop_front(&mut self, frames: usize) {
        let n = (frames * self.joints * 3).min(self.data.len());
        self.data.drain(..n);
    }
}
