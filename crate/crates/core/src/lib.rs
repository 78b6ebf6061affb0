//! Formula-driven supervised pre-training toolkit.
//!
//! * [`ifs`]: iterated function systems and category search
//! * [`dataset`]: FractalDB-style instance expansion and on-disk datasets
//! * [`vit`]: a minimal Vision Transformer with analytic gradients
//! * [`train`]: pre-training on fractal categories and fine-tuning
//! * [`analysis`]: embedding filters, position-embedding similarity,
//!   mean attention distance and attention maps

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod ifs;
pub mod image;
pub mod seed;
pub mod tensor;
pub mod train;
pub mod vit;

pub use error::{Error, Result};
pub use image::Image;
pub use tensor::Tensor;
