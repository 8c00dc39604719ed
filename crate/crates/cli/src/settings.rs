//! Resolution of config file plus command-line overrides.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use motion_stream::backend::{MotionBackend, StyleEmbedding};
use motion_stream::io::load_motion;
use motion_stream::pipeline::{Mode, Warmup};
use motion_stream_service::ServiceConfig;

use crate::Usage;

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Service config file (TOML); its [backend] and [pipeline] tables apply.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Backend seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub backend: Option<String>,
    /// Standard deviation of the toy denoiser noise.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub reencode: Option<usize>,
    #[arg(long)]
    pub buffer: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_parser = parse_warmup)]
    pub warmup: Option<Warmup>,
    #[arg(long)]
    pub retention: Option<usize>,
}

fn parse_warmup(s: &str) -> Result<Warmup, String> {
    s.parse().map_err(|e: motion_stream::Error| e.to_string())
}

pub fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: motion_stream::Error| e.to_string())
}

impl ConfigArgs {
    pub fn service_config(&self) -> Result<ServiceConfig> {
        let mut cfg = match &self.config {
            Some(path) => ServiceConfig::load(path)?,
            None => ServiceConfig::default(),
        };
        let b = &mut cfg.backend;
        if let Some(name) = &self.backend {
            b.name = name.clone();
        }
        if let Some(seed) = self.seed {
            b.seed = seed;
        }
        if let Some(sigma) = self.sigma {
            b.params.noise_sigma = sigma;
        }
        if let Some(window) = self.window {
            b.params.window = window;
        }
        let p = &mut cfg.pipeline;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { p.$f = v; } )* };
        }
        set!(window, stride, reencode, buffer, alpha, steps, warmup);
        if self.retention.is_some() {
            p.retention = self.retention;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct StyleArgs {
    /// Motion file whose style embedding is used.
    #[arg(long, conflicts_with_all = ["style_vec", "style_name"])]
    pub style: Option<PathBuf>,
    /// Raw embedding, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        conflicts_with = "style_name"
    )]
    pub style_vec: Option<Vec<f64>>,
    /// Entry of the config file's style catalog.
    #[arg(long)]
    pub style_name: Option<String>,
}

impl StyleArgs {
    pub fn resolve(
        &self,
        cfg: &ServiceConfig,
        backend: &dyn MotionBackend,
    ) -> Result<StyleEmbedding> {
        let dim = backend.descriptor().style_dim;
        if let Some(path) = &self.style {
            let file = load_motion(path)
                .with_context(|| format!("reading style motion {}", path.display()))?;
            return Ok(backend.style_embed(&file.sequence)?);
        }
        if let Some(v) = &self.style_vec {
            if v.len() != dim {
                return Err(Usage(format!(
                    "--style-vec has {} values, backend expects {dim}",
                    v.len()
                ))
                .into());
            }
            return Ok(StyleEmbedding::new(v.clone())?);
        }
        let name = self
            .style_name
            .as_deref()
            .unwrap_or_else(|| cfg.initial_style());
        let catalog = cfg.catalog(dim)?;
        catalog
            .get(name)
            .cloned()
            .ok_or_else(|| Usage(format!("style `{name}` is not in the catalog")).into())
    }
}
