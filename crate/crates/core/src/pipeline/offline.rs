use std::sync::Arc;

use super::{Emission, Mode, PipelineConfig, PipelineState, Warmup};
use crate::backend::{Conditioning, MotionBackend, StyleEmbedding};
use crate::error::{Error, Result};
use crate::motion::{copy_trajectory, MotionSequence};

/// Single encode/denoise/decode pass over the whole input.
///
/// The input is right-aligned in the decoder's output span; inputs shorter
/// than the window use all available frames.
pub fn run_offline(
    input: &MotionSequence,
    backend: &Arc<dyn MotionBackend>,
    config: &PipelineConfig,
    style: &StyleEmbedding,
) -> Result<Emission> {
    config.validate()?;
    let desc = backend.descriptor();
    let n = input.len();
    if n == 0 {
        return Err(Error::Argument("offline input is empty".into()));
    }
    if n > desc.max_window {
        return Err(Error::Argument(format!(
            "offline input of {n} frames exceeds the model window of {}",
            desc.max_window
        )));
    }
    if input.width() != desc.frame_width {
        return Err(Error::dim("frame width", desc.frame_width, input.width()));
    }
    let z = backend.encode(input)?;
    let z = backend.denoise(
        &z,
        &Conditioning::from_window(input, style, config.steps, 0),
    )?;
    let decoded = backend.decode(&z)?;
    let decoded = decoded.slice(decoded.len() - n..decoded.len())?;
    let features = copy_trajectory(&decoded, input, 0..n)?;
    let features = MotionSequence::from_flat(input.width(), input.fps(), features.into_flat())?;
    let joints = backend.features_to_joints(&features)?;
    Ok(Emission {
        start: 0,
        features,
        joints,
        strides: 1,
        warmup_frames: 0,
    })
}

/// Shifts the offline model along the input by one stride at a time and
/// concatenates the last stride of every generated window.
pub fn run_naive_baseline(
    input: &MotionSequence,
    backend: &Arc<dyn MotionBackend>,
    config: &PipelineConfig,
    style: &StyleEmbedding,
) -> Result<Emission> {
    if input.len() < config.window {
        return Err(Error::Argument(format!(
            "naive baseline needs at least one full window ({} frames), got {}",
            config.window,
            input.len()
        )));
    }
    let config = PipelineConfig {
        mode: Mode::Naive,
        warmup: Warmup::Strict,
        ..config.clone()
    };
    let mut state = PipelineState::new(config, Arc::clone(backend), style.clone())?;
    let mut out = state.push_frames(input)?;
    let tail = state.finish()?;
    out.joints.append(&tail.joints)?;
    out.features = out.features.concat(&tail.features)?;
    out.strides += tail.strides;
    Ok(out)
}
