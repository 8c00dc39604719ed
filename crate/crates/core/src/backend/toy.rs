//! Deterministic linear reference backend.
//!
//! Every operator is linear (plus optional seeded noise in the denoiser), so
//! each output can be recomputed by hand.
//!
//! Temporal layout: a window of `n <= W` frames is right-aligned in a virtual
//! span of `W = window` positions. Token `k` of `T` has its center at position
//! `k * (W - 1) / (T - 1)`.
//!
//! * encode: each frame is assigned to the token with the nearest center; the
//!   frames of a token are mean-pooled and projected to `C` channels by `P`.
//!   Tokens without frames copy the nearest populated token (later tokens win
//!   ties).
//! * decode: position `p` linearly interpolates the two tokens whose centers
//!   bracket it, then maps back with `P^T`.
//! * denoise: `z + gain * B s + content_gain * h(content) + sigma * eps`,
//!   broadcast over tokens. The conditioning branch `h` is re-evaluated on
//!   every step; the result does not depend on the step count.
//! * causal decode: weights `decay^age` (newest has age 0), normalized,
//!   applied to the buffer; the weighted latent is decoded and the last
//!   `out_len` frames are returned.
//! * features to joints: joint `j` is the root trajectory plus `A_j` times the
//!   local features; `A_0 = 0`.
//! * style embed: `S` times the temporal mean of the local features.
//!
//! Parameter generation: every matrix is drawn from `ChaCha8Rng::seed_from_u64(seed)`
//! switched to its own stream (`P`: 1, `B`: 2, `A`: 3, `S`: 4, conditioning: 5)
//! with entries uniform in `[-1, 1)` scaled by `1 / sqrt(fan_in)`. `P` is
//! drawn from standard normals on stream 1 and orthonormalized row by row
//! (modified Gram-Schmidt), so `P^T P` is a projection. Denoise noise uses
//! stream `2^32 + nonce`.
//!
//! The identity configuration ([`ToyBackend::identity`]) uses one token per
//! frame, `P = I`, zero style gain, zero decay and no noise: decode inverts
//! encode on full windows and the whole pipeline reproduces its input.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{BackendDescriptor, Conditioning, MotionBackend, StyleEmbedding};
use crate::error::{Error, Result};
use crate::latent::Latent;
use crate::motion::{JointSequence, MotionSequence, MIN_FRAME_WIDTH, TRAJ_DIMS};

const STREAM_PROJECTION: u64 = 1;
const STREAM_STYLE: u64 = 2;
const STREAM_JOINTS: u64 = 3;
const STREAM_EMBED: u64 = 4;
const STREAM_CONDITION: u64 = 5;
const STREAM_NOISE_BASE: u64 = 1 << 32;

/// Tunable shape and behavior of [`ToyBackend`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyParams {
    pub frame_width: usize,
    pub window: usize,
    pub tokens: usize,
    pub channels: usize,
    pub style_dim: usize,
    pub joint_count: usize,
    pub noise_sigma: f64,
    pub causal_decay: f64,
    pub style_gain: f64,
    pub content_gain: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            frame_width: 12,
            window: 60,
            tokens: 7,
            channels: 12,
            style_dim: 8,
            joint_count: 22,
            noise_sigma: 0.0,
            causal_decay: 0.6,
            style_gain: 1.0,
            content_gain: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    fn seeded_uniform(rows: usize, cols: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let scale = 1.0 / (cols as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.gen_range(-1.0..1.0) * scale)
            .collect();
        Self { rows, cols, data }
    }

    /// Rows are orthonormal; requires `rows <= cols`.
    fn seeded_orthonormal_rows(rows: usize, cols: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut data: Vec<f64> = (0..rows * cols)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        for r in 0..rows {
            for prev in 0..r {
                let dot: f64 = (0..cols)
                    .map(|c| data[r * cols + c] * data[prev * cols + c])
                    .sum();
                for c in 0..cols {
                    data[r * cols + c] -= dot * data[prev * cols + c];
                }
            }
            let norm = (0..cols)
                .map(|c| data[r * cols + c].powi(2))
                .sum::<f64>()
                .sqrt();
            for c in 0..cols {
                data[r * cols + c] /= norm;
            }
        }
        Self { rows, cols, data }
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            *o = self.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = self^T x`.
    fn matvec_transposed(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (r, xr) in x.iter().enumerate().take(self.rows) {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * xr;
            }
        }
    }
}

/// The linear reference backend. See the module docs for its definition.
#[derive(Debug, Clone)]
pub struct ToyBackend {
    params: ToyParams,
    seed: u64,
    descriptor: BackendDescriptor,
    /// `C x d`; `None` is the identity.
    projection: Option<Dense>,
    style_proj: Dense,
    joint_map: Dense,
    embed_proj: Dense,
    condition: Dense,
}

impl ToyBackend {
    pub fn new(seed: u64, params: ToyParams) -> Result<Self> {
        Self::build(seed, params, false)
    }

    /// The identity configuration for frame width `d` and window length `window`.
    pub fn identity(d: usize, window: usize, joint_count: usize, seed: u64) -> Result<Self> {
        let params = ToyParams {
            frame_width: d,
            window,
            tokens: window,
            channels: d,
            joint_count,
            noise_sigma: 0.0,
            causal_decay: 0.0,
            style_gain: 0.0,
            content_gain: 0.0,
            ..ToyParams::default()
        };
        Self::build(seed, params, true)
    }

    fn build(seed: u64, params: ToyParams, identity: bool) -> Result<Self> {
        let p = &params;
        let cfg = |c, d: String| Err(Error::config(c, d));
        if p.frame_width < MIN_FRAME_WIDTH {
            return cfg("frame width ≥ 4", format!("got {}", p.frame_width));
        }
        if p.window == 0 {
            return cfg("window ≥ 1", "got 0".into());
        }
        if p.tokens == 0 || p.tokens > p.window {
            return cfg("1 ≤ tokens ≤ window", format!("got {}", p.tokens));
        }
        if p.channels == 0 || p.channels > p.frame_width {
            return cfg("1 ≤ channels ≤ frame width", format!("got {}", p.channels));
        }
        if p.style_dim == 0 || p.joint_count == 0 {
            return cfg("style dim and joint count ≥ 1", String::new());
        }
        if !(p.noise_sigma.is_finite() && p.noise_sigma >= 0.0) {
            return cfg("noise sigma ≥ 0", format!("got {}", p.noise_sigma));
        }
        if !(0.0..=1.0).contains(&p.causal_decay) {
            return cfg("0 ≤ causal decay ≤ 1", format!("got {}", p.causal_decay));
        }
        if !(p.style_gain.is_finite() && p.content_gain.is_finite()) {
            return cfg("finite gains", String::new());
        }

        let d = p.frame_width;
        let local = d - TRAJ_DIMS;
        let projection = (!identity)
            .then(|| Dense::seeded_orthonormal_rows(p.channels, d, seed, STREAM_PROJECTION));
        let mut joint_map = Dense::seeded_uniform(p.joint_count * 3, local, seed, STREAM_JOINTS);
        joint_map.data[..3 * local]
            .iter_mut()
            .for_each(|v| *v = 0.0);

        let descriptor = BackendDescriptor {
            frame_width: d,
            latent_shape: (p.tokens, p.channels),
            style_dim: p.style_dim,
            joint_count: p.joint_count,
            max_window: p.window,
            decode_len: p.window,
            deterministic: p.noise_sigma == 0.0,
        };
        Ok(Self {
            seed,
            descriptor,
            projection,
            style_proj: Dense::seeded_uniform(p.channels, p.style_dim, seed, STREAM_STYLE),
            joint_map,
            embed_proj: Dense::seeded_uniform(p.style_dim, local, seed, STREAM_EMBED),
            condition: Dense::seeded_uniform(p.channels, local, seed, STREAM_CONDITION),
            params,
        })
    }

    pub fn params(&self) -> &ToyParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `P` as a row-major `C x d` matrix (identity for the identity configuration).
    pub fn projection_matrix(&self) -> Vec<f64> {
        match &self.projection {
            Some(m) => m.data.clone(),
            None => {
                let d = self.params.frame_width;
                (0..d * d)
                    .map(|i| if i / d == i % d { 1.0 } else { 0.0 })
                    .collect()
            }
        }
    }

    /// `B` as a row-major `C x style_dim` matrix, before `style_gain`.
    pub fn style_matrix(&self) -> &[f64] {
        &self.style_proj.data
    }

    /// `A` as a row-major `(3 J) x (d - 3)` matrix.
    pub fn joint_matrix(&self) -> &[f64] {
        &self.joint_map.data
    }

    /// `S` as a row-major `style_dim x (d - 3)` matrix.
    pub fn embed_matrix(&self) -> &[f64] {
        &self.embed_proj.data
    }

    /// Fractional token coordinate of virtual position `p`.
    pub fn token_coordinate(&self, p: usize) -> f64 {
        let (w, t) = (self.params.window, self.params.tokens);
        if t == 1 || w == 1 {
            0.0
        } else {
            p as f64 * (t - 1) as f64 / (w - 1) as f64
        }
    }

    /// Token owning virtual position `p` (nearest center, halves round up).
    pub fn token_of(&self, p: usize) -> usize {
        let k = (self.token_coordinate(p) + 0.5).floor() as usize;
        k.min(self.params.tokens - 1)
    }

    fn to_channels(&self, frame: &[f64], out: &mut [f64]) {
        match &self.projection {
            Some(m) => m.matvec(frame, out),
            None => out.copy_from_slice(frame),
        }
    }

    fn to_frame(&self, v: &[f64], out: &mut [f64]) {
        match &self.projection {
            Some(m) => m.matvec_transposed(v, out),
            None => out.copy_from_slice(v),
        }
    }

    fn check_latent(&self, z: &Latent) -> Result<()> {
        z.expect_shape(self.descriptor.latent_shape)
    }

    /// Decodes virtual positions `range` of `z`.
    fn decode_range(&self, z: &Latent, range: std::ops::Range<usize>) -> MotionSequence {
        let d = self.params.frame_width;
        let t = self.params.tokens;
        let c = self.params.channels;
        let mut data = vec![0.0; range.len() * d];
        let mut mixed = vec![0.0; c];
        for (row, p) in data.chunks_exact_mut(d).zip(range) {
            let pos = self.token_coordinate(p);
            let k = (pos.floor() as usize).min(t.saturating_sub(2));
            let frac = pos - k as f64;
            if frac == 0.0 || t == 1 {
                mixed.copy_from_slice(z.token(k));
            } else {
                let (a, b) = (z.token(k), z.token(k + 1));
                for ((m, x), y) in mixed.iter_mut().zip(a).zip(b) {
                    *m = (1.0 - frac) * x + frac * y;
                }
            }
            self.to_frame(&mixed, row);
        }
        MotionSequence::from_parts_unchecked(d, crate::motion::DEFAULT_FPS, data)
    }

    fn guidance(&self, cond: &Conditioning<'_>) -> Vec<f64> {
        let c = self.params.channels;
        let local = self.params.frame_width - TRAJ_DIMS;
        let mut style = vec![0.0; c];
        self.style_proj.matvec(&cond.style.vec, &mut style);

        // content branch: mean over frames of softsign(W c_t)
        let mut content = vec![0.0; c];
        let mut h = vec![0.0; c];
        let frames = cond.frames().max(1) as f64;
        for row in cond.content.chunks_exact(local) {
            self.condition.matvec(row, &mut h);
            for (acc, v) in content.iter_mut().zip(&h) {
                *acc += v / (1.0 + v.abs());
            }
        }
        style
            .iter()
            .zip(&content)
            .map(|(s, h)| self.params.style_gain * s + self.params.content_gain * (h / frames))
            .collect()
    }
}

impl MotionBackend for ToyBackend {
    fn descriptor(&self) -> &BackendDescriptor {
        &self.descriptor
    }

    fn encode(&self, window: &MotionSequence) -> Result<Latent> {
        let d = self.params.frame_width;
        if window.width() != d {
            return Err(Error::dim("frame width", d, window.width()));
        }
        let n = window.len();
        if n == 0 || n > self.params.window {
            return Err(Error::Argument(format!(
                "encoder window must hold 1..={} frames, got {n}",
                self.params.window
            )));
        }
        let (t, c) = self.descriptor.latent_shape;
        let offset = self.params.window - n;
        let mut sums = vec![0.0; t * d];
        let mut counts = vec![0usize; t];
        for (i, frame) in window.frames().enumerate() {
            let k = self.token_of(offset + i);
            counts[k] += 1;
            for (s, v) in sums[k * d..(k + 1) * d].iter_mut().zip(frame) {
                *s += v;
            }
        }
        let mut z = Latent::zeros(t, c);
        for (k, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let inv = count as f64;
            let mean: Vec<f64> = sums[k * d..(k + 1) * d].iter().map(|s| s / inv).collect();
            self.to_channels(&mean, z.token_mut(k));
        }
        // fill unpopulated tokens from their nearest populated neighbor
        let populated: Vec<usize> = (0..t).filter(|&k| counts[k] > 0).collect();
        for k in (0..t).filter(|&k| counts[k] == 0) {
            let src = *populated
                .iter()
                .min_by_key(|&&j| (j.abs_diff(k), std::cmp::Reverse(j)))
                .expect("window is non-empty");
            let row = z.token(src).to_vec();
            z.token_mut(k).copy_from_slice(&row);
        }
        Ok(z)
    }

    fn decode(&self, z: &Latent) -> Result<MotionSequence> {
        self.check_latent(z)?;
        Ok(self.decode_range(z, 0..self.params.window))
    }

    fn denoise(&self, z: &Latent, cond: &Conditioning<'_>) -> Result<Latent> {
        self.check_latent(z)?;
        let local = self.params.frame_width - TRAJ_DIMS;
        if cond.steps == 0 {
            return Err(Error::Argument("denoising needs at least one step".into()));
        }
        if cond.style.dim() != self.params.style_dim {
            return Err(Error::dim(
                "style embedding",
                self.params.style_dim,
                cond.style.dim(),
            ));
        }
        if cond.content.len() != cond.frames() * local {
            return Err(Error::dim(
                "content features",
                cond.frames() * local,
                cond.content.len(),
            ));
        }

        let mut guidance = Vec::new();
        for _ in 0..cond.steps {
            guidance = self.guidance(cond);
        }

        let mut out = z.clone();
        let c = self.params.channels;
        for k in 0..out.tokens() {
            for (v, g) in out.token_mut(k).iter_mut().zip(&guidance) {
                *v += g;
            }
        }
        if self.params.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(STREAM_NOISE_BASE.wrapping_add(cond.nonce));
            for v in out.as_flat_mut() {
                let eps: f64 = rng.sample(StandardNormal);
                *v += self.params.noise_sigma * eps;
            }
        }
        debug_assert_eq!(out.channels(), c);
        Ok(out)
    }

    fn causal_decode(&self, buffer: &[Latent], out_len: usize) -> Result<MotionSequence> {
        if buffer.is_empty() {
            return Err(Error::Argument(
                "causal decode needs a non-empty buffer".into(),
            ));
        }
        if out_len == 0 || out_len > self.params.window {
            return Err(Error::Argument(format!(
                "causal decode length must be 1..={}, got {out_len}",
                self.params.window
            )));
        }
        for z in buffer {
            self.check_latent(z)?;
        }
        let decay = self.params.causal_decay;
        let weights: Vec<f64> = (0..buffer.len())
            .map(|age| decay.powi(age as i32))
            .collect();
        let total: f64 = weights.iter().sum();
        let (t, c) = self.descriptor.latent_shape;
        let mut mixed = Latent::zeros(t, c);
        let mut first = true;
        for (z, w) in buffer.iter().rev().zip(&weights) {
            if *w == 0.0 {
                continue;
            }
            let w = w / total;
            if first && w == 1.0 {
                mixed = z.clone();
            } else {
                for (m, v) in mixed.as_flat_mut().iter_mut().zip(z.as_flat()) {
                    *m += w * v;
                }
            }
            first = false;
        }
        let w = self.params.window;
        Ok(self.decode_range(&mixed, w - out_len..w))
    }

    fn features_to_joints(&self, seq: &MotionSequence) -> Result<JointSequence> {
        let d = self.params.frame_width;
        if seq.width() != d {
            return Err(Error::dim("frame width", d, seq.width()));
        }
        let jc = self.params.joint_count;
        let mut data = vec![0.0; seq.len() * jc * 3];
        for (frame, out) in seq.frames().zip(data.chunks_exact_mut(jc * 3)) {
            self.joint_map.matvec(&frame[TRAJ_DIMS..], out);
            for joint in out.chunks_exact_mut(3) {
                for (v, r) in joint.iter_mut().zip(&frame[..TRAJ_DIMS]) {
                    *v += r;
                }
            }
        }
        JointSequence::from_flat(jc, data)
    }

    fn style_embed(&self, style_motion: &MotionSequence) -> Result<StyleEmbedding> {
        let d = self.params.frame_width;
        if style_motion.width() != d {
            return Err(Error::dim("frame width", d, style_motion.width()));
        }
        if style_motion.is_empty() {
            return Err(Error::Argument("style motion is empty".into()));
        }
        let local = d - TRAJ_DIMS;
        let mut mean = vec![0.0; local];
        for frame in style_motion.frames() {
            for (m, v) in mean.iter_mut().zip(&frame[TRAJ_DIMS..]) {
                *m += v;
            }
        }
        let n = style_motion.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut vec = vec![0.0; self.params.style_dim];
        self.embed_proj.matvec(&mean, &mut vec);
        Ok(StyleEmbedding { vec, label: None })
    }
}
