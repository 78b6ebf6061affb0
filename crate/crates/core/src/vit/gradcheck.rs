//! Central finite-difference check of the analytic gradients, run in `f64`.

use rand::seq::index;
use rand::Rng as _;
use rayon::prelude::*;

use super::model::{block_inputs, loss_from_block};
use super::{backward_patches, cross_entropy, forward_patches, ModelConfig, ViTParams};
use crate::error::Result;
use crate::seed;
use crate::tensor::Tensor;

/// Central difference formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    /// `(f(x+ε) − f(x−ε)) / 2ε`, error O(ε²).
    TwoPoint,
    /// `(−f(x+2ε) + 8f(x+ε) − 8f(x−ε) + f(x−2ε)) / 12ε`, error O(ε⁴).
    FourPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub epsilon: f64,
    pub stencil: Stencil,
    /// Entries checked per tensor; `None` checks every entry.
    pub max_entries_per_tensor: Option<usize>,
    /// Denominator floor of the relative error, so gradients that are zero
    /// analytically compare by absolute difference.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            epsilon: 1e-3,
            stencil: Stencil::FourPoint,
            max_entries_per_tensor: None,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorError {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub max_abs_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorError>,
    pub loss: f64,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_rel_err() < tolerance
    }

    pub fn entries_checked(&self) -> usize {
        self.tensors.iter().map(|t| t.checked).sum()
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Checks every parameter entry on a seeded random image and label.
pub fn grad_check(cfg: &ModelConfig, seed_value: u64) -> Result<GradCheckReport> {
    grad_check_with(cfg, seed_value, &GradCheckOptions::default(), |_| {})
}

/// Like [`grad_check`]; `tamper` may modify the analytic gradients before
/// comparison (used to confirm the check can fail).
pub fn grad_check_with(
    cfg: &ModelConfig,
    seed_value: u64,
    opts: &GradCheckOptions,
    tamper: impl Fn(&mut ViTParams<f64>),
) -> Result<GradCheckReport> {
    cfg.validate()?;
    let mut rng = seed::rng(seed::derive(&[seed_value, 0x67_7261_64]));
    let params: ViTParams<f64> = ViTParams::init(cfg, seed_value).cast();
    let patches = Tensor::from_vec(
        &[cfg.num_patches(), cfg.patch_dim()],
        (0..cfg.num_patches() * cfg.patch_dim()).map(|_| rng.random::<f64>()).collect(),
    )?;
    let label = rng.random_range(0..cfg.classes);

    let trace = forward_patches(&patches, &params, cfg)?;
    let mut analytic = ViTParams::zeros(cfg);
    let loss = backward_patches(&trace, label, &params, cfg, 1.0, &mut analytic)?;
    tamper(&mut analytic);

    // A perturbed entry only changes blocks from its own onwards, so earlier
    // token matrices are reused.
    let inputs = block_inputs(&patches, &params, cfg)?;
    let names = ViTParams::<f64>::names(cfg);
    let first_block: Vec<Option<usize>> = names
        .iter()
        .map(|n| match n.strip_prefix("blocks.") {
            Some(rest) => rest.split('.').next().and_then(|l| l.parse().ok()),
            None if matches!(n.as_str(), "patch_embed" | "cls_token" | "pos_embed") => None,
            None => Some(cfg.layers),
        })
        .collect();
    let loss_at = |p: &ViTParams<f64>, ti: usize| -> Result<f64> {
        match first_block[ti] {
            Some(start) => loss_from_block(&inputs[start], start, p, cfg, label),
            None => {
                let t = forward_patches(&patches, p, cfg)?;
                cross_entropy(t.logits(), label)
            }
        }
    };

    let lens: Vec<usize> = params.tensors().iter().map(|t| t.len()).collect();
    let mut jobs = Vec::new();
    for (ti, &len) in lens.iter().enumerate() {
        let entries: Vec<usize> = match opts.max_entries_per_tensor {
            Some(k) if k < len => {
                let mut picks = index::sample(&mut rng, len, k).into_vec();
                picks.sort_unstable();
                picks
            }
            _ => (0..len).collect(),
        };
        jobs.extend(entries.into_iter().map(|e| (ti, e)));
    }

    let numeric: Vec<f64> = jobs
        .par_iter()
        .map_init(
            || params.clone(),
            |p, &(ti, e)| -> Result<f64> {
                let orig = p.tensors()[ti].data()[e];
                let mut at = |offset: f64| -> Result<f64> {
                    p.tensors_mut()[ti].data_mut()[e] = orig + offset;
                    loss_at(p, ti)
                };
                let h = opts.epsilon;
                let d = match opts.stencil {
                    Stencil::TwoPoint => (at(h)? - at(-h)?) / (2.0 * h),
                    Stencil::FourPoint => {
                        (-at(2.0 * h)? + 8.0 * at(h)? - 8.0 * at(-h)? + at(-2.0 * h)?) / (12.0 * h)
                    }
                };
                p.tensors_mut()[ti].data_mut()[e] = orig;
                Ok(d)
            },
        )
        .collect::<Result<_>>()?;

    let mut tensors: Vec<TensorError> = names
        .into_iter()
        .map(|name| TensorError {
            name,
            checked: 0,
            max_rel_err: 0.0,
            max_abs_err: 0.0,
        })
        .collect();
    let analytic_tensors = analytic.tensors();
    for (&(ti, e), &num) in jobs.iter().zip(&numeric) {
        let a = analytic_tensors[ti].data()[e];
        let t = &mut tensors[ti];
        t.checked += 1;
        t.max_rel_err = t.max_rel_err.max(relative_error(a, num, opts.floor));
        t.max_abs_err = t.max_abs_err.max((a - num).abs());
    }
    Ok(GradCheckReport { tensors, loss })
}
