use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::seed;
use crate::tensor::{Scalar, Tensor};

/// Standard deviation of the truncated-normal weight initialization.
pub const INIT_STD: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams<T = f32> {
    pub norm1_gain: Tensor<T>,
    pub norm1_bias: Tensor<T>,
    /// `[heads, dim, head_dim]`
    pub w_q: Tensor<T>,
    pub w_k: Tensor<T>,
    pub w_v: Tensor<T>,
    /// `[heads * head_dim, dim]`
    pub w_o: Tensor<T>,
    pub norm2_gain: Tensor<T>,
    pub norm2_bias: Tensor<T>,
    pub mlp_w1: Tensor<T>,
    pub mlp_b1: Tensor<T>,
    pub mlp_w2: Tensor<T>,
    pub mlp_b2: Tensor<T>,
}

/// Every trainable tensor of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ViTParams<T = f32> {
    /// `[patch_dim, dim]`
    pub patch_embed: Tensor<T>,
    /// `[1, dim]`
    pub cls_token: Tensor<T>,
    /// `[tokens, dim]`, row 0 belongs to the class token.
    pub pos_embed: Tensor<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub norm_gain: Tensor<T>,
    pub norm_bias: Tensor<T>,
    /// `[dim, classes]`
    pub head_weight: Tensor<T>,
    pub head_bias: Tensor<T>,
}

fn shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (d, h, hd, m) = (cfg.dim, cfg.heads, cfg.head_dim, cfg.mlp_hidden);
    let mut out = vec![
        ("patch_embed".to_string(), vec![cfg.patch_dim(), d]),
        ("cls_token".to_string(), vec![1, d]),
        ("pos_embed".to_string(), vec![cfg.tokens(), d]),
    ];
    for l in 0..cfg.layers {
        let p = |n: &str| format!("blocks.{l}.{n}");
        out.extend([
            (p("norm1.gain"), vec![d]),
            (p("norm1.bias"), vec![d]),
            (p("attn.w_q"), vec![h, d, hd]),
            (p("attn.w_k"), vec![h, d, hd]),
            (p("attn.w_v"), vec![h, d, hd]),
            (p("attn.w_o"), vec![h * hd, d]),
            (p("norm2.gain"), vec![d]),
            (p("norm2.bias"), vec![d]),
            (p("mlp.w1"), vec![d, m]),
            (p("mlp.b1"), vec![m]),
            (p("mlp.w2"), vec![m, d]),
            (p("mlp.b2"), vec![d]),
        ]);
    }
    out.extend([
        ("norm.gain".to_string(), vec![d]),
        ("norm.bias".to_string(), vec![d]),
        ("head.weight".to_string(), vec![d, cfg.classes]),
        ("head.bias".to_string(), vec![cfg.classes]),
    ]);
    out
}

impl<T: Scalar> ViTParams<T> {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let tensors = shapes(cfg).into_iter().map(|(_, s)| Tensor::zeros(&s)).collect();
        Self::from_tensors(cfg, tensors).expect("shapes come from the config")
    }

    /// Assembles parameters from tensors in [`ViTParams::names`] order.
    pub fn from_tensors(cfg: &ModelConfig, tensors: Vec<Tensor<T>>) -> Result<Self> {
        let expected = shapes(cfg);
        if tensors.len() != expected.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} tensors, got {}",
                expected.len(),
                tensors.len()
            )));
        }
        for ((name, shape), t) in expected.iter().zip(&tensors) {
            if t.shape() != shape.as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {shape:?}, got {:?}",
                    t.shape()
                )));
            }
        }
        let mut it = tensors.into_iter();
        let mut next = || it.next().expect("length checked");
        let patch_embed = next();
        let cls_token = next();
        let pos_embed = next();
        let blocks = (0..cfg.layers)
            .map(|_| BlockParams {
                norm1_gain: next(),
                norm1_bias: next(),
                w_q: next(),
                w_k: next(),
                w_v: next(),
                w_o: next(),
                norm2_gain: next(),
                norm2_bias: next(),
                mlp_w1: next(),
                mlp_b1: next(),
                mlp_w2: next(),
                mlp_b2: next(),
            })
            .collect();
        Ok(ViTParams {
            patch_embed,
            cls_token,
            pos_embed,
            blocks,
            norm_gain: next(),
            norm_bias: next(),
            head_weight: next(),
            head_bias: next(),
        })
    }

    pub fn names(cfg: &ModelConfig) -> Vec<String> {
        shapes(cfg).into_iter().map(|(n, _)| n).collect()
    }

    /// Tensors in canonical order (matches [`ViTParams::names`]).
    pub fn tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = vec![&self.patch_embed, &self.cls_token, &self.pos_embed];
        for b in &self.blocks {
            out.extend([
                &b.norm1_gain,
                &b.norm1_bias,
                &b.w_q,
                &b.w_k,
                &b.w_v,
                &b.w_o,
                &b.norm2_gain,
                &b.norm2_bias,
                &b.mlp_w1,
                &b.mlp_b1,
                &b.mlp_w2,
                &b.mlp_b2,
            ]);
        }
        out.extend([&self.norm_gain, &self.norm_bias, &self.head_weight, &self.head_bias]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = vec![&mut self.patch_embed, &mut self.cls_token, &mut self.pos_embed];
        for b in &mut self.blocks {
            out.extend([
                &mut b.norm1_gain,
                &mut b.norm1_bias,
                &mut b.w_q,
                &mut b.w_k,
                &mut b.w_v,
                &mut b.w_o,
                &mut b.norm2_gain,
                &mut b.norm2_bias,
                &mut b.mlp_w1,
                &mut b.mlp_b1,
                &mut b.mlp_w2,
                &mut b.mlp_b2,
            ]);
        }
        out.extend([
            &mut self.norm_gain,
            &mut self.norm_bias,
            &mut self.head_weight,
            &mut self.head_bias,
        ]);
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Infers the configuration-relevant checks against `cfg`.
    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        let tensors = self.tensors().into_iter().cloned().collect();
        Self::from_tensors(cfg, tensors).map(|_| ())
    }

    pub fn add_scaled(&mut self, other: &ViTParams<T>, scale: T) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_scaled(b, scale);
        }
    }

    pub fn scale(&mut self, s: T) {
        for t in self.tensors_mut() {
            t.scale(s);
        }
    }

    pub fn fill(&mut self, v: T) {
        for t in self.tensors_mut() {
            t.fill(v);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.all_finite())
    }

    pub fn cast<U: Scalar>(&self) -> ViTParams<U> {
        ViTParams {
            patch_embed: self.patch_embed.cast(),
            cls_token: self.cls_token.cast(),
            pos_embed: self.pos_embed.cast(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockParams {
                    norm1_gain: b.norm1_gain.cast(),
                    norm1_bias: b.norm1_bias.cast(),
                    w_q: b.w_q.cast(),
                    w_k: b.w_k.cast(),
                    w_v: b.w_v.cast(),
                    w_o: b.w_o.cast(),
                    norm2_gain: b.norm2_gain.cast(),
                    norm2_bias: b.norm2_bias.cast(),
                    mlp_w1: b.mlp_w1.cast(),
                    mlp_b1: b.mlp_b1.cast(),
                    mlp_w2: b.mlp_w2.cast(),
                    mlp_b2: b.mlp_b2.cast(),
                })
                .collect(),
            norm_gain: self.norm_gain.cast(),
            norm_bias: self.norm_bias.cast(),
            head_weight: self.head_weight.cast(),
            head_bias: self.head_bias.cast(),
        }
    }
}

/// Samples from N(0, std²) truncated to ±2 std.
pub(crate) fn trunc_normal<T: Scalar>(shape: &[usize], std: f64, rng: &mut seed::Rng) -> Tensor<T> {
    let normal = Normal::new(0.0, std).expect("positive std");
    let data = (0..shape.iter().product::<usize>())
        .map(|_| loop {
            let v: f64 = normal.sample(rng);
            if v.abs() <= 2.0 * std {
                break T::cst(v);
            }
        })
        .collect();
    Tensor::from_vec(shape, data).expect("length matches shape")
}

impl ViTParams<f32> {
    /// Weights, class token and position embeddings from a truncated normal
    /// with std [`INIT_STD`]; norm gains one; all biases zero.
    pub fn init(cfg: &ModelConfig, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed::derive(&[seed_value, seed::tag::INIT]));
        let mut p = ViTParams::zeros(cfg);
        let names = Self::names(cfg);
        for (name, t) in names.iter().zip(p.tensors_mut()) {
            if name.ends_with(".gain") {
                t.fill(1.0);
            } else if name.ends_with("bias") || name.ends_with(".b1") || name.ends_with(".b2") {
                t.fill(0.0);
            } else {
                *t = trunc_normal(t.shape(), INIT_STD, &mut rng);
            }
        }
        p
    }

    /// Replaces the classifier with a freshly initialized one for `classes` outputs.
    pub fn reset_head(&mut self, classes: usize, seed_value: u64) {
        let mut rng = seed::rng(seed::derive(&[seed_value, seed::tag::HEAD]));
        let dim = self.head_weight.shape()[0];
        self.head_weight = trunc_normal(&[dim, classes], INIT_STD, &mut rng);
        self.head_bias = Tensor::zeros(&[classes]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_shapes_and_determinism() {
        let cfg = ModelConfig::nano(16);
        let p = ViTParams::init(&cfg, 3);
        p.check(&cfg).unwrap();
        assert_eq!(p, ViTParams::init(&cfg, 3));
        assert_ne!(p, ViTParams::init(&cfg, 4));
        assert_eq!(p.tensors().len(), ViTParams::<f32>::names(&cfg).len());
        assert!(p.blocks[0].norm1_gain.data().iter().all(|&v| v == 1.0));
        assert!(p.patch_embed.data().iter().all(|v| v.abs() <= 0.04));
        // 4096 + 64 + 4160 + 4 * 33216 + 128 + 64 * 16 + 16
        assert_eq!(p.param_count(), 4096 + 64 + 4160 + 4 * 33216 + 128 + 1024 + 16);
    }

    #[test]
    fn mismatched_shapes_rejected() {
        let p = ViTParams::init(&ModelConfig::micro(3), 1);
        assert!(p.check(&ModelConfig::micro(4)).is_err());
    }
}
