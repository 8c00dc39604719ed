//! Model operators used by the streaming pipeline.
//!
//! A backend bundles the window encoder, the non-causal decoder, the
//! style-conditioned latent denoiser, the causal buffer decoder, the
//! feature-to-joint map and the style embedder behind [`MotionBackend`].
//! [`ToyBackend`] is the deterministic linear reference implementation;
//! trained backends plug in through [`BackendRegistry`].

mod toy;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent::Latent;
use crate::motion::{JointSequence, MotionSequence, TRAJ_DIMS};

pub use toy::{ToyBackend, ToyParams};

/// Static shape information about a backend instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub frame_width: usize,
    pub latent_shape: (usize, usize),
    pub style_dim: usize,
    pub joint_count: usize,
    /// Longest window the encoder accepts.
    pub max_window: usize,
    /// Number of frames produced by [`MotionBackend::decode`].
    pub decode_len: usize,
    pub deterministic: bool,
}

/// Opaque conditioning vector selecting the output style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleEmbedding {
    pub vec: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl StyleEmbedding {
    pub fn new(vec: Vec<f64>) -> Result<Self> {
        if vec.is_empty() {
            return Err(Error::Argument("style embedding must not be empty".into()));
        }
        if !vec.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("style embedding"));
        }
        Ok(Self { vec, label: None })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            vec: vec![0.0; dim],
            label: None,
        }
    }

    /// Uniform entries in `[-1, 1)` drawn from a ChaCha8 stream keyed by `seed`.
    pub fn seeded(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            vec: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            label: None,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }
}

/// Everything the denoiser is conditioned on for one window.
#[derive(Debug, Clone)]
pub struct Conditioning<'a> {
    /// Local features of the window, row-major `frames x (d - 3)`.
    pub content: Vec<f64>,
    pub trajectory: Vec<[f64; TRAJ_DIMS]>,
    pub style: &'a StyleEmbedding,
    pub steps: usize,
    /// Selects the noise stream of stochastic backends; the pipeline passes
    /// the stride index so paired runs see identical noise.
    pub nonce: u64,
}

impl<'a> Conditioning<'a> {
    pub fn from_window(
        window: &MotionSequence,
        style: &'a StyleEmbedding,
        steps: usize,
        nonce: u64,
    ) -> Self {
        Self {
            content: window.local_features(),
            trajectory: window.trajectories(),
            style,
            steps,
            nonce,
        }
    }

    pub fn frames(&self) -> usize {
        self.trajectory.len()
    }
}

/// The operator contract every backend implements.
///
/// Implementations are immutable after construction and must be safe to call
/// from several threads at once.
pub trait MotionBackend: Send + Sync + fmt::Debug {
    fn descriptor(&self) -> &BackendDescriptor;

    /// Encodes a window of `1..=max_window` frames into a latent.
    fn encode(&self, window: &MotionSequence) -> Result<Latent>;

    /// Non-causal decode to `decode_len` frames.
    fn decode(&self, z: &Latent) -> Result<MotionSequence>;

    fn denoise(&self, z: &Latent, cond: &Conditioning<'_>) -> Result<Latent>;

    /// Decodes the next `out_len` frames from the latent buffer (oldest
    /// first). The output may depend on nothing but the buffer contents.
    fn causal_decode(&self, buffer: &[Latent], out_len: usize) -> Result<MotionSequence>;

    fn features_to_joints(&self, seq: &MotionSequence) -> Result<JointSequence>;

    fn style_embed(&self, style_motion: &MotionSequence) -> Result<StyleEmbedding>;
}

/// Backend selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendSpec {
    pub name: String,
    pub seed: u64,
    pub params: ToyParams,
}

impl Default for BackendSpec {
    fn default() -> Self {
        Self {
            name: "toy".into(),
            seed: 0,
            params: ToyParams::default(),
        }
    }
}

pub type BackendFactory = fn(&BackendSpec) -> Result<Arc<dyn MotionBackend>>;

/// Name-keyed backend constructors.
#[derive(Clone)]
pub struct BackendRegistry {
    factories: BTreeMap<String, BackendFactory>,
}

impl fmt::Debug for BackendRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.factories.keys()).finish()
    }
}

impl Default for BackendRegistry {
    fn default() -> Self {
        let mut reg = Self {
            factories: BTreeMap::new(),
        };
        reg.register("toy", |spec| {
            Ok(Arc::new(ToyBackend::new(spec.seed, spec.params.clone())?))
        });
        reg.register("toy-identity", |spec| {
            Ok(Arc::new(ToyBackend::identity(
                spec.params.frame_width,
                spec.params.window,
                spec.params.joint_count,
                spec.seed,
            )?))
        });
        reg
    }
}

impl BackendRegistry {
    pub fn register(&mut self, name: impl Into<String>, factory: BackendFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, spec: &BackendSpec) -> Result<Arc<dyn MotionBackend>> {
        let factory = self
            .factories
            .get(&spec.name)
            .ok_or_else(|| Error::UnknownBackend(spec.name.clone()))?;
        factory(spec)
    }
}

/// Builds a backend from the built-in registry.
pub fn build_backend(spec: &BackendSpec) -> Result<Arc<dyn MotionBackend>> {
    BackendRegistry::default().build(spec)
}
