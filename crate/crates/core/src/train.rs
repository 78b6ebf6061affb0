//! Pre-training on generated categories and downstream fine-tuning.
//!
//! The pre-training objective is plain K-way classification of the
//! generating category: every image rendered from category `k` has label `k`.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::image::{write_atomic, Image};
use crate::seed::{self, tag};
use crate::tensor::Tensor;
use crate::vit::{
    backward_patches, forward_patches, patchify, save_checkpoint, Checkpoint, ModelConfig, ViTParams,
};

/// Samples per gradient partial sum. Partial sums are reduced in a fixed
/// order, so results do not depend on the thread count.
const REDUCE_CHUNK: usize = 4;

/// Images with integer labels in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub images: Vec<Image>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledSet {
    pub fn new(images: Vec<Image>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: bad, classes });
        }
        Ok(LabeledSet {
            images,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> LabeledSet {
        LabeledSet {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// Keeps the first `n` samples of every class, in original order.
    pub fn take_per_class(&self, n: usize) -> LabeledSet {
        let mut seen = vec![0usize; self.classes];
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| {
                let c = &mut seen[self.labels[i]];
                *c += 1;
                *c <= n
            })
            .collect();
        self.subset(&keep)
    }

    /// Splits off every `k`-th sample of each class (k = round(1 / fraction))
    /// as a holdout; returns `(train, holdout)`.
    pub fn split_holdout(&self, fraction: f64) -> (LabeledSet, LabeledSet) {
        if fraction <= 0.0 {
            return (self.clone(), self.subset(&[]));
        }
        let k = (1.0 / fraction).round().max(1.0) as usize;
        let mut seen = vec![0usize; self.classes];
        let (mut train, mut hold) = (Vec::new(), Vec::new());
        for i in 0..self.len() {
            let c = &mut seen[self.labels[i]];
            if *c % k == k - 1 {
                hold.push(i);
            } else {
                train.push(i);
            }
            *c += 1;
        }
        (self.subset(&train), self.subset(&hold))
    }

    /// Loads every image a manifest lists; the label is its category id.
    pub fn from_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<LabeledSet> {
        let images = manifest
            .instances
            .par_iter()
            .map(|r| Image::read(&dir.join(&r.relative_path)))
            .collect::<Result<Vec<_>>>()?;
        let labels = manifest.instances.iter().map(|r| r.category_id).collect();
        LabeledSet::new(images, labels, manifest.num_classes())
    }

    /// Loads a generated dataset directory or a directory of CIFAR-10 binary
    /// batches (training batches, or `test_batch.bin` when `cifar_test`).
    pub fn load_dir(dir: &Path, cifar_test: bool) -> Result<LabeledSet> {
        if dir.join(crate::dataset::MANIFEST_FILE).exists() {
            FdslTask::load(dir).map(|t| t.data)
        } else {
            load_cifar10_dir(dir, cifar_test)
        }
    }
}

/// Generated images paired with their category labels.
#[derive(Debug, Clone)]
pub struct FdslTask {
    pub manifest: DatasetManifest,
    pub data: LabeledSet,
}

impl FdslTask {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = DatasetManifest::load(dir)?;
        let data = LabeledSet::from_manifest(dir, &manifest)?;
        Ok(FdslTask { manifest, data })
    }

    pub fn classes(&self) -> usize {
        self.manifest.num_classes()
    }
}

pub const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;

/// One CIFAR-10 binary batch: records of a label byte followed by 1024 red,
/// 1024 green and 1024 blue bytes of a 32×32 image.
pub fn decode_cifar10_batch(bytes: &[u8], path: &Path) -> Result<LabeledSet> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
        return Err(Error::format(
            "CIFAR-10",
            path,
            format!("{} bytes is not a whole number of {CIFAR_RECORD}-byte records", bytes.len()),
        ));
    }
    let mut images = Vec::with_capacity(bytes.len() / CIFAR_RECORD);
    let mut labels = Vec::with_capacity(images.capacity());
    for rec in bytes.chunks_exact(CIFAR_RECORD) {
        let label = rec[0] as usize;
        if label >= 10 {
            return Err(Error::format("CIFAR-10", path, format!("label byte {label}")));
        }
        let planes = &rec[1..];
        let data = (0..1024)
            .flat_map(|p| [planes[p], planes[1024 + p], planes[2048 + p]])
            .collect();
        images.push(Image::from_raw(32, 32, 3, data)?);
        labels.push(label);
    }
    LabeledSet::new(images, labels, 10)
}

pub fn load_cifar10_dir(dir: &Path, test: bool) -> Result<LabeledSet> {
    let files: Vec<PathBuf> = if test {
        vec![dir.join("test_batch.bin")]
    } else {
        (1..=5)
            .map(|i| dir.join(format!("data_batch_{i}.bin")))
            .filter(|p| p.exists())
            .collect()
    };
    if files.is_empty() || !files[0].exists() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no dataset manifest or CIFAR-10 batches"),
        ));
    }
    let mut all = LabeledSet {
        images: Vec::new(),
        labels: Vec::new(),
        classes: 10,
    };
    for f in files {
        let bytes = fs::read(&f).map_err(|e| Error::io(&f, e))?;
        let part = decode_cifar10_batch(&bytes, &f)?;
        all.images.extend(part.images);
        all.labels.extend(part.labels);
    }
    Ok(all)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    /// Final learning rate of the cosine schedule as a fraction of `lr`.
    pub min_lr_ratio: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub deterministic: bool,
    pub hflip: bool,
    /// Write a checkpoint every this many epochs (0 = final only).
    pub save_every: usize,
    pub out_dir: Option<PathBuf>,
    /// Stop once an epoch's training accuracy reaches this value.
    pub stop_at_train_acc: Option<f64>,
    /// Print one line per epoch to stderr.
    pub verbose: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 64,
            lr: 5e-4,
            weight_decay: 0.05,
            warmup_epochs: 5,
            min_lr_ratio: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            deterministic: true,
            hflip: true,
            save_every: 0,
            out_dir: None,
            stop_at_train_acc: None,
            verbose: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        self.validate_optimizer()
    }

    fn validate_optimizer(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return fail("learning rate must be finite and non-negative");
        }
        if !(self.weight_decay >= 0.0) || !(0.0..=1.0).contains(&self.min_lr_ratio) {
            return fail("weight decay must be >= 0 and min_lr_ratio in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || !(self.adam_eps > 0.0) {
            return fail("invalid Adam hyperparameters");
        }
        Ok(())
    }

    /// Linear warmup to `lr`, then cosine decay to `lr · min_lr_ratio`.
    pub fn lr_at(&self, step: usize, steps_per_epoch: usize) -> f64 {
        let warmup = self.warmup_epochs * steps_per_epoch;
        let total = (self.epochs * steps_per_epoch).max(1);
        if step < warmup {
            return self.lr * (step + 1) as f64 / warmup as f64;
        }
        let progress = (step - warmup) as f64 / (total - warmup).max(1) as f64;
        let min = self.lr * self.min_lr_ratio;
        min + 0.5 * (self.lr - min) * (1.0 + (PI * progress.min(1.0)).cos())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub eval_acc: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub rows: Vec<EpochMetrics>,
}

impl MetricsLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_acc,eval_acc,seconds\n");
        for r in &self.rows {
            let eval = r.eval_acc.map(|v| format!("{v:.6}")).unwrap_or_default();
            s.push_str(&format!(
                "{},{:.6},{:.6},{},{:.3}\n",
                r.epoch, r.train_loss, r.train_acc, eval, r.seconds
            ));
        }
        s
    }

    pub fn last(&self) -> Option<&EpochMetrics> {
        self.rows.last()
    }

    /// Row for 1-based `epoch`.
    pub fn epoch(&self, epoch: usize) -> Option<&EpochMetrics> {
        self.rows.iter().find(|r| r.epoch == epoch)
    }
}

/// Decoupled-weight-decay Adam.
#[derive(Debug, Clone)]
pub struct AdamW {
    m: ViTParams<f32>,
    v: ViTParams<f32>,
    decay: Vec<bool>,
    step: i32,
}

impl AdamW {
    pub fn new(cfg: &ModelConfig) -> Self {
        // Matrices decay; biases, norms, class token and position embeddings do not.
        let decay = ViTParams::<f32>::names(cfg)
            .iter()
            .zip(ViTParams::<f32>::zeros(cfg).tensors())
            .map(|(name, t)| t.shape().len() >= 2 && name != "cls_token" && name != "pos_embed")
            .collect();
        AdamW {
            m: ViTParams::zeros(cfg),
            v: ViTParams::zeros(cfg),
            decay,
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut ViTParams<f32>, grads: &ViTParams<f32>, lr: f64, tc: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (tc.beta1 as f32, tc.beta2 as f32);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        let (lr, wd, eps) = (lr as f32, tc.weight_decay as f32, tc.adam_eps as f32);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()))
            .zip(&self.decay);
        for (((p, g), (m, v)), &decay) in tensors {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let update = (*m / c1) / ((*v / c2).sqrt() + eps);
                if decay {
                    *p -= lr * wd * *p;
                }
                *p -= lr * update;
            }
        }
    }
}

/// Converts an image to the model's channel count and resolution.
pub fn prepare_image(image: &Image, cfg: &ModelConfig) -> Image {
    image
        .with_channels(cfg.channels)
        .resize(cfg.image_width, cfg.image_height)
}

struct Partial {
    grads: ViTParams<f32>,
    loss: f64,
    correct: usize,
}

fn argmax(v: &[f32]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f32::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

fn batch_partial(
    items: &[(Tensor<f32>, usize)],
    params: &ViTParams<f32>,
    cfg: &ModelConfig,
    scale: f32,
) -> Result<Partial> {
    let mut grads = ViTParams::zeros(cfg);
    let mut loss = 0.0;
    let mut correct = 0;
    for (patches, label) in items {
        let trace = forward_patches(patches, params, cfg)?;
        if argmax(trace.logits()) == *label {
            correct += 1;
        }
        loss += backward_patches(&trace, *label, params, cfg, scale, &mut grads)? as f64;
    }
    Ok(Partial { grads, loss, correct })
}

fn merge(mut a: Partial, b: Partial) -> Partial {
    a.grads.add_scaled(&b.grads, 1.0);
    a.loss += b.loss;
    a.correct += b.correct;
    a
}

/// Mean loss, correct count and mean gradient over one batch.
pub fn batch_gradients(
    batch: &[(Tensor<f32>, usize)],
    params: &ViTParams<f32>,
    cfg: &ModelConfig,
    deterministic: bool,
) -> Result<(f64, usize, ViTParams<f32>)> {
    let scale = 1.0 / batch.len() as f32;
    let total = if deterministic {
        let partials = batch
            .par_chunks(REDUCE_CHUNK)
            .map(|c| batch_partial(c, params, cfg, scale))
            .collect::<Result<Vec<_>>>()?;
        partials.into_iter().reduce(merge).expect("non-empty batch")
    } else {
        batch
            .par_chunks(REDUCE_CHUNK)
            .map(|c| batch_partial(c, params, cfg, scale))
            .try_reduce_with(|a, b| Ok(merge(a, b)))
            .expect("non-empty batch")?
    };
    Ok((total.loss / batch.len() as f64, total.correct, total.grads))
}

/// Trains `params` in place. On a non-finite step the parameters are left
/// at their last finite state and `NonFinite` is returned.
pub fn fit(
    params: &mut ViTParams<f32>,
    cfg: &ModelConfig,
    train: &LabeledSet,
    eval: Option<&LabeledSet>,
    tc: &TrainConfig,
) -> Result<MetricsLog> {
    tc.validate_optimizer()?;
    params.check(cfg)?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if train.classes > cfg.classes {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a {}-class head",
            train.classes, cfg.classes
        )));
    }
    let images: Vec<Image> = train.images.par_iter().map(|im| prepare_image(im, cfg)).collect();
    let steps_per_epoch = train.len().div_ceil(tc.batch_size);
    let mut opt = AdamW::new(cfg);
    let mut log = MetricsLog::default();
    let mut step = 0usize;

    for epoch in 1..=tc.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(&[tc.seed, tag::SHUFFLE, epoch as u64])));
        let mut aug = seed::rng(seed::derive(&[tc.seed, tag::AUGMENT, epoch as u64]));
        let flips: Vec<bool> = order.iter().map(|_| tc.hflip && aug.random::<bool>()).collect();

        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (batch_idx, idx) in order.chunks(tc.batch_size).enumerate() {
            let offset = batch_idx * tc.batch_size;
            let batch = idx
                .iter()
                .enumerate()
                .map(|(j, &i)| {
                    let img = if flips[offset + j] {
                        images[i].flip_horizontal()
                    } else {
                        images[i].clone()
                    };
                    Ok((patchify(&img, cfg.patch)?, train.labels[i]))
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, c, grads) = batch_gradients(&batch, params, cfg, tc.deterministic)?;
            if !loss.is_finite() || !grads.all_finite() {
                if let Some(dir) = &tc.out_dir {
                    save_checkpoint(&dir.join("last_good.fdsl"), &Checkpoint::new(*cfg, params.clone())?)?;
                }
                return Err(Error::NonFinite(format!("training step {step} (epoch {epoch})")));
            }
            opt.update(params, &grads, tc.lr_at(step, steps_per_epoch), tc);
            step += 1;
            loss_sum += loss * batch.len() as f64;
            correct += c;
        }

        let eval_acc = match eval {
            Some(set) if !set.is_empty() => Some(evaluate_params(params, cfg, set)?),
            _ => None,
        };
        let row = EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            train_acc: correct as f64 / train.len() as f64,
            eval_acc,
            seconds: start.elapsed().as_secs_f64(),
        };
        if tc.verbose {
            let eval = row.eval_acc.map(|v| format!(" eval_acc={v:.4}")).unwrap_or_default();
            eprintln!(
                "epoch {epoch}/{} loss={:.4} train_acc={:.4}{eval} ({:.1}s)",
                tc.epochs, row.train_loss, row.train_acc, row.seconds
            );
        }
        let reached = tc.stop_at_train_acc.is_some_and(|t| row.train_acc >= t);
        log.rows.push(row);
        if let Some(dir) = &tc.out_dir {
            write_atomic(&dir.join("metrics.csv"), log.to_csv().as_bytes())?;
            if tc.save_every > 0 && epoch % tc.save_every == 0 {
                let name = format!("epoch{epoch:04}.fdsl");
                save_checkpoint(&dir.join(name), &Checkpoint::new(*cfg, params.clone())?)?;
            }
        }
        if reached {
            break;
        }
    }
    if let Some(dir) = &tc.out_dir {
        save_checkpoint(&dir.join("final.fdsl"), &Checkpoint::new(*cfg, params.clone())?)?;
    }
    Ok(log)
}

/// Pre-trains a freshly initialized model to predict each image's category.
pub fn pretrain(task: &FdslTask, tc: &TrainConfig, model_cfg: &ModelConfig) -> Result<(Checkpoint, MetricsLog)> {
    tc.validate()?;
    model_cfg.validate()?;
    if model_cfg.classes != task.classes() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} classes, dataset has {} categories",
            model_cfg.classes,
            task.classes()
        )));
    }
    let mut params = ViTParams::init(model_cfg, tc.seed);
    let log = fit(&mut params, model_cfg, &task.data, None, tc)?;
    Ok((Checkpoint::new(*model_cfg, params)?, log))
}

/// Bilinear resampling of the patch-grid rows of a position embedding; the
/// class-token row is copied unchanged.
pub fn interpolate_pos_embed(pos: &Tensor<f32>, from: (usize, usize), to: (usize, usize)) -> Result<Tensor<f32>> {
    let dim = pos.shape()[1];
    if pos.shape()[0] != from.0 * from.1 + 1 {
        return Err(Error::ShapeMismatch(format!(
            "position embedding {:?} for a {}x{} grid",
            pos.shape(),
            from.0,
            from.1
        )));
    }
    if from == to {
        return Ok(pos.clone());
    }
    let mut out = Tensor::zeros(&[to.0 * to.1 + 1, dim]);
    out.row_mut(0).copy_from_slice(pos.row(0));
    let coord = |i: usize, n_to: usize, n_from: usize| -> (usize, usize, f32) {
        let f = ((i as f32 + 0.5) * n_from as f32 / n_to as f32 - 0.5).clamp(0.0, (n_from - 1) as f32);
        let i0 = f.floor() as usize;
        (i0, (i0 + 1).min(n_from - 1), f - i0 as f32)
    };
    for r in 0..to.0 {
        let (r0, r1, tr) = coord(r, to.0, from.0);
        for c in 0..to.1 {
            let (c0, c1, tc) = coord(c, to.1, from.1);
            let src = |rr: usize, cc: usize| pos.row(1 + rr * from.1 + cc);
            let dst = out.row_mut(1 + r * to.1 + c);
            for k in 0..dim {
                let top = src(r0, c0)[k] * (1.0 - tc) + src(r0, c1)[k] * tc;
                let bottom = src(r1, c0)[k] * (1.0 - tc) + src(r1, c1)[k] * tc;
                dst[k] = top * (1.0 - tr) + bottom * tr;
            }
        }
    }
    Ok(out)
}

/// Adapts pre-trained weights to `target`: a fresh classifier for
/// `target.classes` and position embeddings resampled to the new grid.
pub fn adapt_for_finetune(ckpt: &Checkpoint, target: &ModelConfig, seed_value: u64) -> Result<ViTParams<f32>> {
    target.validate()?;
    let src = &ckpt.config;
    let same_body = src.channels == target.channels
        && src.patch == target.patch
        && src.dim == target.dim
        && src.heads == target.heads
        && src.head_dim == target.head_dim
        && src.layers == target.layers
        && src.mlp_hidden == target.mlp_hidden;
    if !same_body {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint body {src:?} does not match target {target:?}"
        )));
    }
    let mut params = ckpt.params.clone();
    params.pos_embed = interpolate_pos_embed(&params.pos_embed, src.grid(), target.grid())?;
    params.reset_head(target.classes, seed_value);
    params.check(target)?;
    Ok(params)
}

/// Full fine-tuning from a checkpoint. `epochs == 0` returns the adapted,
/// untrained model.
pub fn finetune(
    ckpt: &Checkpoint,
    train: &LabeledSet,
    eval: Option<&LabeledSet>,
    tc: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<(Checkpoint, MetricsLog)> {
    tc.validate_optimizer()?;
    let mut params = adapt_for_finetune(ckpt, model_cfg, tc.seed)?;
    let log = fit(&mut params, model_cfg, train, eval, tc)?;
    Ok((Checkpoint::new(*model_cfg, params)?, log))
}

/// The same schedule from a random initialization, for comparison runs.
pub fn train_from_scratch(
    train: &LabeledSet,
    eval: Option<&LabeledSet>,
    tc: &TrainConfig,
    model_cfg: &ModelConfig,
) -> Result<(Checkpoint, MetricsLog)> {
    tc.validate_optimizer()?;
    model_cfg.validate()?;
    let mut params = ViTParams::init(model_cfg, tc.seed);
    let log = fit(&mut params, model_cfg, train, eval, tc)?;
    Ok((Checkpoint::new(*model_cfg, params)?, log))
}

/// Top-1 accuracy.
pub fn evaluate_params(params: &ViTParams<f32>, cfg: &ModelConfig, data: &LabeledSet) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    if data.classes > cfg.classes {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for a {}-class head",
            data.classes, cfg.classes
        )));
    }
    let correct = data
        .images
        .par_iter()
        .zip(&data.labels)
        .map(|(img, &label)| -> Result<usize> {
            let patches = patchify(&prepare_image(img, cfg), cfg.patch)?;
            let trace = forward_patches(&patches, params, cfg)?;
            Ok((argmax(trace.logits()) == label) as usize)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum::<usize>();
    Ok(correct as f64 / data.len() as f64)
}

pub fn evaluate(ckpt: &Checkpoint, data: &LabeledSet) -> Result<f64> {
    evaluate_params(&ckpt.params, &ckpt.config, data)
}
