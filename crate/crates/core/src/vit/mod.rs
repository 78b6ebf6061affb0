//! A minimal Vision Transformer with hand-written backpropagation.
//!
//! Patches are linearly projected, a class token is prepended and learned
//! position embeddings added. Each encoder block is pre-norm:
//! `z' = MSA(LN(z)) + z`, `z = MLP(LN(z')) + z'`, and the classifier reads
//! the layer-normalized class-token row of the last block.

mod checkpoint;
mod gradcheck;
mod model;
mod params;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use gradcheck::{grad_check, grad_check_with, relative_error, GradCheckOptions, GradCheckReport, Stencil, TensorError};
pub use model::{
    attention, backward, backward_patches, cross_entropy, forward, forward_patches, gelu, msa, patchify,
    ForwardTrace, LN_EPS,
};
pub use params::{BlockParams, ViTParams, INIT_STD};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub channels: usize,
    pub patch: usize,
    pub dim: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub layers: usize,
    pub classes: usize,
    pub mlp_hidden: usize,
}

impl ModelConfig {
    /// Desk-scale default: 64×64 inputs, 8-pixel patches, D=64, 4 heads of 16, 4 layers.
    pub fn nano(classes: usize) -> Self {
        ModelConfig {
            image_height: 64,
            image_width: 64,
            channels: 1,
            patch: 8,
            dim: 64,
            heads: 4,
            head_dim: 16,
            layers: 4,
            classes,
            mlp_hidden: 128,
        }
    }

    /// DeiT-Tiny geometry at 224×224.
    pub fn deit_tiny(classes: usize) -> Self {
        ModelConfig {
            image_height: 224,
            image_width: 224,
            channels: 3,
            patch: 16,
            dim: 192,
            heads: 3,
            head_dim: 64,
            layers: 12,
            classes,
            mlp_hidden: 768,
        }
    }

    /// The smallest configuration exercising every code path: 8×8 input,
    /// 4-pixel patches, D=8, two heads, two layers.
    pub fn micro(classes: usize) -> Self {
        ModelConfig {
            image_height: 8,
            image_width: 8,
            channels: 1,
            patch: 4,
            dim: 8,
            heads: 2,
            head_dim: 4,
            layers: 2,
            classes,
            mlp_hidden: 16,
        }
    }

    pub fn preset(name: &str, classes: usize) -> Result<Self> {
        match name {
            "nano" => Ok(Self::nano(classes)),
            "nano2" => Ok(ModelConfig {
                layers: 2,
                ..Self::nano(classes)
            }),
            "micro" => Ok(Self::micro(classes)),
            "deit-tiny" => Ok(Self::deit_tiny(classes)),
            _ => Err(Error::InvalidArgument(format!(
                "unknown preset {name:?} (nano, nano2, micro, deit-tiny)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidArgument(msg));
        if self.patch == 0 || self.image_height % self.patch != 0 || self.image_width % self.patch != 0 {
            return fail(format!(
                "image {}x{} is not divisible into {}-pixel patches",
                self.image_height, self.image_width, self.patch
            ));
        }
        if self.image_height == 0 || self.image_width == 0 {
            return fail("empty image".into());
        }
        if self.channels != 1 && self.channels != 3 {
            return fail(format!("channels must be 1 or 3, got {}", self.channels));
        }
        if self.heads == 0 || self.head_dim == 0 || self.heads * self.head_dim != self.dim {
            return fail(format!(
                "heads ({}) x head_dim ({}) must equal dim ({})",
                self.heads, self.head_dim, self.dim
            ));
        }
        if self.layers == 0 || self.classes == 0 || self.mlp_hidden == 0 {
            return fail("layers, classes and mlp_hidden must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.image_height / self.patch, self.image_width / self.patch)
    }

    pub fn num_patches(&self) -> usize {
        let (gh, gw) = self.grid();
        gh * gw
    }

    pub fn tokens(&self) -> usize {
        self.num_patches() + 1
    }

    pub fn patch_dim(&self) -> usize {
        self.patch * self.patch * self.channels
    }

    pub fn image_diagonal(&self) -> f64 {
        ((self.image_height.pow(2) + self.image_width.pow(2)) as f64).sqrt()
    }

    /// Flat record stored alongside the weights in checkpoints.
    pub(crate) fn to_record(self) -> [usize; 10] {
        [
            self.image_height,
            self.image_width,
            self.channels,
            self.patch,
            self.dim,
            self.heads,
            self.head_dim,
            self.layers,
            self.classes,
            self.mlp_hidden,
        ]
    }

    pub(crate) fn from_record(r: &[usize]) -> Result<Self> {
        if r.len() != 10 {
            return Err(Error::ShapeMismatch(format!("config record of length {}", r.len())));
        }
        let cfg = ModelConfig {
            image_height: r[0],
            image_width: r[1],
            channels: r[2],
            patch: r[3],
            dim: r[4],
            heads: r[5],
            head_dim: r[6],
            layers: r[7],
            classes: r[8],
            mlp_hidden: r[9],
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
