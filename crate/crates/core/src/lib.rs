//! Real-time motion stylization over a sliding window of latent codes.
//!
//! Incoming motion frames are windowed, encoded, denoised under a style
//! embedding, decoded, re-encoded, blended into a bounded latent buffer and
//! decoded causally, so each stride emits a few new stylized frames while the
//! root trajectory of the input is preserved exactly.
//!
//! ```
//! use std::sync::Arc;
//! use motion_stream::backend::{MotionBackend, StyleEmbedding, ToyBackend, ToyParams};
//! use motion_stream::experiment::synthetic_motion;
//! use motion_stream::pipeline::{PipelineConfig, PipelineState};
//!
//! let backend: Arc<dyn MotionBackend> = Arc::new(ToyBackend::new(7, ToyParams::default()).unwrap());
//! let style = StyleEmbedding::seeded(8, 1);
//! let mut state = PipelineState::new(PipelineConfig::default(), backend, style).unwrap();
//! let input = synthetic_motion(64, 12, 20.0, 3).unwrap();
//! let out = state.push_frames(&input).unwrap();
//! assert_eq!(out.joints.len(), 64);
//! ```

pub mod backend;
pub mod error;
pub mod experiment;
pub mod io;
pub mod latent;
pub mod metrics;
pub mod motion;
pub mod par;
pub mod pipeline;
pub mod timing;

pub use error::{Error, Result};
