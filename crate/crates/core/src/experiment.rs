//! Helpers for running and scoring generation modes side by side.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::backend::{MotionBackend, StyleEmbedding};
use crate::error::Result;
use crate::metrics::{boundary_discontinuity, total_jitter};
use crate::motion::{JointSequence, MotionSequence, TRAJ_DIMS};
use crate::pipeline::{
    run_naive_baseline, run_offline, Emission, Mode, PipelineConfig, PipelineState,
};

/// Smooth walking-like motion: the root advances along a slowly turning
/// heading with a small vertical bob; every local feature is a sum of two
/// sinusoids with seeded amplitude, frequency and phase.
pub fn synthetic_motion(frames: usize, d: usize, fps: f64, seed: u64) -> Result<MotionSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let speed = rng.gen_range(0.8..1.4);
    let turn = rng.gen_range(-0.2..0.2);
    let local: Vec<[f64; 6]> = (TRAJ_DIMS..d)
        .map(|_| {
            [
                rng.gen_range(0.3..1.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.0..TAU),
                rng.gen_range(0.05..0.3),
                rng.gen_range(2.0..4.0),
                rng.gen_range(0.0..TAU),
            ]
        })
        .collect();
    let mut data = Vec::with_capacity(frames * d);
    let (mut x, mut z) = (0.0, 0.0);
    for t in 0..frames {
        let secs = t as f64 / fps;
        let heading = turn * secs;
        x += speed / fps * heading.cos();
        z += speed / fps * heading.sin();
        data.extend_from_slice(&[x, 0.9 + 0.02 * (TAU * 2.0 * secs).sin(), z]);
        for [a1, f1, p1, a2, f2, p2] in &local {
            data.push(a1 * (TAU * f1 * secs + p1).sin() + a2 * (TAU * f2 * secs + p2).sin());
        }
    }
    MotionSequence::from_flat(d, fps, data)
}

/// Runs `input` through the generation path selected by `config.mode`.
pub fn run_mode(
    input: &MotionSequence,
    backend: &Arc<dyn MotionBackend>,
    config: &PipelineConfig,
    style: &StyleEmbedding,
) -> Result<Emission> {
    match config.mode {
        Mode::Offline => run_offline(input, backend, config, style),
        Mode::Naive => run_naive_baseline(input, backend, config, style),
        _ => {
            let mut state = PipelineState::new(config.clone(), Arc::clone(backend), style.clone())?;
            let mut out = state.push_frames(input)?;
            let tail = state.finish()?;
            out.joints.append(&tail.joints)?;
            out.features = out.features.concat(&tail.features)?;
            out.strides += tail.strides;
            Ok(out)
        }
    }
}

/// Emitted joints after the warm-up prefix.
pub fn steady_joints(em: &Emission) -> JointSequence {
    em.joints.tail_from(em.warmup_frames)
}

/// Indices `stride, 2 * stride, ...` below `len`: where a steady-state
/// emission of length `len` switches from one stride's output to the next.
pub fn stride_boundaries(len: usize, stride: usize) -> Vec<usize> {
    (stride..len).step_by(stride.max(1)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeScore {
    pub mode: Mode,
    pub jitter: f64,
    pub discontinuity: f64,
    pub frames: usize,
}

/// Post-warm-up jitter and stride-boundary discontinuity of one run.
pub fn score(em: &Emission, mode: Mode, stride: usize) -> Result<ModeScore> {
    let steady = steady_joints(em);
    let jitter = total_jitter(std::slice::from_ref(&steady))?.jitter;
    let discontinuity = boundary_discontinuity(&steady, &stride_boundaries(steady.len(), stride))?;
    Ok(ModeScore {
        mode,
        jitter,
        discontinuity,
        frames: steady.len(),
    })
}

/// Runs every mode in `modes` over the same input, backend and style.
pub fn score_modes(
    input: &MotionSequence,
    backend: &Arc<dyn MotionBackend>,
    config: &PipelineConfig,
    style: &StyleEmbedding,
    modes: &[Mode],
) -> Result<Vec<ModeScore>> {
    modes
        .iter()
        .map(|&mode| {
            let cfg = PipelineConfig {
                mode,
                ..config.clone()
            };
            let em = run_mode(input, backend, &cfg, style)?;
            score(&em, mode, cfg.stride)
        })
        .collect()
}
