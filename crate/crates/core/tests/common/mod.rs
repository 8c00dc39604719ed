#![allow(dead_code)]

use std::sync::Arc;

use motion_stream::backend::{MotionBackend, StyleEmbedding, ToyBackend, ToyParams};
use motion_stream::motion::MotionSequence;
use motion_stream::pipeline::{Emission, PipelineConfig, PipelineState};

pub fn toy(seed: u64, params: ToyParams) -> Arc<dyn MotionBackend> {
    Arc::new(ToyBackend::new(seed, params).unwrap())
}

pub fn default_toy() -> Arc<dyn MotionBackend> {
    toy(11, ToyParams::default())
}

pub fn noisy_toy(seed: u64, sigma: f64) -> Arc<dyn MotionBackend> {
    toy(
        seed,
        ToyParams {
            noise_sigma: sigma,
            ..ToyParams::default()
        },
    )
}

/// Tiny shapes for long-running property tests.
pub fn small_params() -> ToyParams {
    ToyParams {
        frame_width: 5,
        window: 8,
        tokens: 4,
        channels: 4,
        style_dim: 2,
        joint_count: 2,
        ..ToyParams::default()
    }
}

pub fn small_config() -> PipelineConfig {
    PipelineConfig {
        window: 8,
        stride: 2,
        reencode: 4,
        buffer: 3,
        ..PipelineConfig::default()
    }
}

pub fn style(seed: u64) -> StyleEmbedding {
    StyleEmbedding::seeded(8, seed)
}

pub fn state(
    config: PipelineConfig,
    backend: &Arc<dyn MotionBackend>,
    s: StyleEmbedding,
) -> PipelineState {
    PipelineState::new(config, Arc::clone(backend), s).unwrap()
}

/// Pushes `input` in chunks of `chunk` frames and returns every emission.
pub fn stream(state: &mut PipelineState, input: &MotionSequence, chunk: usize) -> Vec<Emission> {
    let mut out = Vec::new();
    let mut at = 0;
    while at < input.len() {
        let end = (at + chunk).min(input.len());
        out.push(state.push_frames(&input.slice(at..end).unwrap()).unwrap());
        at = end;
    }
    out
}

pub fn frames_at(input: &MotionSequence, range: std::ops::Range<usize>) -> MotionSequence {
    input.slice(range).unwrap()
}
