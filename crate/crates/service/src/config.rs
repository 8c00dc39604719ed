//! Service configuration file (TOML), shared with the command-line tool.
//!
//! ```toml
//! listen = "127.0.0.1:7878"
//! default_style = "neutral"
//!
//! [backend]
//! name = "toy"
//! seed = 0
//!
//! [pipeline]
//! window = 60
//! stride = 4
//!
//! [styles]
//! neutral = { seed = 1 }
//! custom = { vec = [0.1, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, -0.3] }
//! ```
//!
//! `MOTION_STREAM_ADDR` overrides `listen` and `MOTION_STREAM_SEED` overrides
//! `backend.seed`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use motion_stream::backend::{BackendSpec, StyleEmbedding};
use motion_stream::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

pub const ENV_ADDR: &str = "MOTION_STREAM_ADDR";
pub const ENV_SEED: &str = "MOTION_STREAM_SEED";

/// A catalog entry: a seeded random embedding or explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum StyleSource {
    Seed { seed: u64 },
    Vec { vec: Vec<f64> },
}

impl StyleSource {
    pub fn resolve(&self, name: &str, dim: usize) -> Result<StyleEmbedding, ServiceError> {
        let style = match self {
            StyleSource::Seed { seed } => StyleEmbedding::seeded(dim, *seed),
            StyleSource::Vec { vec } => {
                if vec.len() != dim {
                    return Err(ServiceError::BadConfig(format!(
                        "style `{name}` has {} values, backend expects {dim}",
                        vec.len()
                    )));
                }
                StyleEmbedding::new(vec.clone())
                    .map_err(|e| ServiceError::BadConfig(format!("style `{name}`: {e}")))?
            }
        };
        Ok(style.with_label(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub backend: BackendSpec,
    pub pipeline: PipelineConfig,
    /// Style a session starts with; defaults to the first catalog entry.
    pub default_style: Option<String>,
    pub styles: BTreeMap<String, StyleSource>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let styles = [("neutral", 1), ("bouncy", 2), ("heavy", 3)]
            .into_iter()
            .map(|(n, seed)| (n.to_string(), StyleSource::Seed { seed }))
            .collect();
        Self {
            listen: "127.0.0.1:7878".into(),
            backend: BackendSpec::default(),
            pipeline: PipelineConfig::default(),
            default_style: Some("neutral".into()),
            styles,
        }
    }
}

impl ServiceConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ServiceError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ServiceError::BadConfig(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ServiceError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| ServiceError::BadConfig(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Applies the environment overrides.
    pub fn apply_env(&mut self) -> Result<(), ServiceError> {
        self.apply_env_from(|k| std::env::var(k).ok())
    }

    pub fn apply_env_from(
        &mut self,
        get: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ServiceError> {
        if let Some(addr) = get(ENV_ADDR) {
            self.listen = addr;
        }
        if let Some(seed) = get(ENV_SEED) {
            self.backend.seed = seed.trim().parse().map_err(|_| {
                ServiceError::BadConfig(format!("{ENV_SEED}=`{seed}` is not an integer"))
            })?;
        }
        Ok(())
    }

    pub fn check(&self) -> Result<(), ServiceError> {
        if self.styles.is_empty() {
            return Err(ServiceError::BadConfig("style catalog is empty".into()));
        }
        if let Some(name) = &self.default_style {
            if !self.styles.contains_key(name) {
                return Err(ServiceError::BadConfig(format!(
                    "default style `{name}` is not in the catalog"
                )));
            }
        }
        self.pipeline.validate()?;
        Ok(())
    }

    pub fn initial_style(&self) -> &str {
        self.default_style
            .as_deref()
            .or_else(|| self.styles.keys().next().map(String::as_str))
            .unwrap_or_default()
    }

    /// Resolves every catalog entry for a backend with `dim`-sized embeddings.
    pub fn catalog(&self, dim: usize) -> Result<BTreeMap<String, StyleEmbedding>, ServiceError> {
        self.styles
            .iter()
            .map(|(name, src)| Ok((name.clone(), src.resolve(name, dim)?)))
            .collect()
    }
}
