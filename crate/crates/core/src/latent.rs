//! Latent tensors, the bounded latent buffer and the exponential blend.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// A `tokens x channels` latent tensor, stored row-major by token.
#[derive(Debug, Clone, PartialEq)]
pub struct Latent {
    tokens: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Latent {
    pub fn zeros(tokens: usize, channels: usize) -> Self {
        Self {
            tokens,
            channels,
            data: vec![0.0; tokens * channels],
        }
    }

    pub fn from_flat(tokens: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if tokens == 0 || channels == 0 {
            return Err(Error::Argument("latent shape must be positive".into()));
        }
        if data.len() != tokens * channels {
            return Err(Error::dim("latent elements", tokens * channels, data.len()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("latent"));
        }
        Ok(Self {
            tokens,
            channels,
            data,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.tokens, self.channels)
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn token(&self, k: usize) -> &[f64] {
        &self.data[k * self.channels..(k + 1) * self.channels]
    }

    pub fn token_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.channels..(k + 1) * self.channels]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn expect_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::Argument(format!(
                "latent shape {:?} does not match {:?}",
                self.shape(),
                shape
            )));
        }
        Ok(())
    }
}

/// `alpha * fresh + (1 - alpha) * recent`, elementwise.
///
/// With no `recent` latent (empty buffer) the fresh latent is returned as is.
pub fn blend(fresh: &Latent, recent: Option<&Latent>, alpha: f64) -> Result<Latent> {
    let Some(recent) = recent else {
        return Ok(fresh.clone());
    };
    recent.expect_shape(fresh.shape())?;
    if alpha == 1.0 {
        return Ok(fresh.clone());
    }
    let keep = 1.0 - alpha;
    let data = fresh
        .data
        .iter()
        .zip(&recent.data)
        .map(|(n, r)| alpha * n + keep * r)
        .collect();
    Ok(Latent {
        tokens: fresh.tokens,
        channels: fresh.channels,
        data,
    })
}

/// The `capacity` most recent latents, oldest first.
#[derive(Debug, Clone)]
pub struct LatentBuffer {
    items: VecDeque<Latent>,
    capacity: usize,
}

impl LatentBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "latent buffer capacity must be positive");
        Self {
            items: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    /// Appends `z`, dropping the oldest entry once over capacity.
    pub fn push(&mut self, z: Latent) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(z);
    }

    pub fn newest(&self) -> Option<&Latent> {
        self.items.back()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &Latent> + ExactSizeIterator {
        self.items.iter()
    }

    /// Contiguous oldest-to-newest view, as handed to the causal decoder.
    pub fn as_slice(&mut self) -> &[Latent] {
        self.items.make_contiguous()
    }
}
