use super::{BlockParams, ModelConfig, ViTParams};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::tensor::{gemm, MatRef, Scalar, Tensor};

pub const LN_EPS: f64 = 1e-6;

/// Splits an image into non-overlapping `patch`×`patch` tiles in row-major
/// tile order; each tile is flattened (row, column, channel) and scaled to [0, 1].
pub fn patchify(image: &Image, patch: usize) -> Result<Tensor<f32>> {
    if patch == 0 || image.width % patch != 0 || image.height % patch != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} image is not divisible into {patch}-pixel patches",
            image.width, image.height
        )));
    }
    let (gw, gh, c) = (image.width / patch, image.height / patch, image.channels);
    let pd = patch * patch * c;
    let mut data = Vec::with_capacity(gw * gh * pd);
    for py in 0..gh {
        for px in 0..gw {
            for y in 0..patch {
                let start = image.index(px * patch, py * patch + y);
                data.extend(image.data[start..start + patch * c].iter().map(|&v| v as f32 / 255.0));
            }
        }
    }
    Tensor::from_vec(&[gw * gh, pd], data)
}

/// Tanh approximation of GELU.
#[inline]
pub fn gelu<T: Scalar>(x: T) -> T {
    let k = T::cst(0.797_884_560_802_865_4);
    let half = T::cst(0.5);
    half * x * (T::one() + (k * (x + T::cst(0.044715) * x * x * x)).tanh())
}

#[inline]
fn gelu_grad<T: Scalar>(x: T) -> T {
    let k = T::cst(0.797_884_560_802_865_4);
    let c = T::cst(0.044715);
    let half = T::cst(0.5);
    let t = (k * (x + c * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * k * (T::one() + T::cst(3.0) * c * x * x)
}

fn softmax_rows<T: Scalar>(data: &mut [T], cols: usize) {
    for row in data.chunks_exact_mut(cols) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut sum = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v = *v / sum;
        }
    }
}

/// `softmax(Q Kᵀ / √d) V` with a row-wise, max-shifted softmax.
pub fn attention<T: Scalar>(q: &Tensor<T>, k: &Tensor<T>, v: &Tensor<T>) -> Result<Tensor<T>> {
    let ok = q.shape().len() == 2
        && k.shape().len() == 2
        && v.shape().len() == 2
        && q.shape()[1] == k.shape()[1]
        && k.shape()[0] == v.shape()[0];
    if !ok {
        return Err(Error::ShapeMismatch(format!(
            "attention over Q {:?}, K {:?}, V {:?}",
            q.shape(),
            k.shape(),
            v.shape()
        )));
    }
    let (n, m, dv) = (q.shape()[0], k.shape()[0], v.shape()[1]);
    let mut scores = vec![T::zero(); n * m];
    gemm(q.mat(), k.mat().t(), T::zero(), &mut scores, m);
    let scale = T::one() / T::cst(q.shape()[1] as f64).sqrt();
    scores.iter_mut().for_each(|s| *s *= scale);
    softmax_rows(&mut scores, m);
    let mut out = Tensor::zeros(&[n, dv]);
    gemm(MatRef::new(&scores, n, m), v.mat(), T::zero(), out.data_mut(), dv);
    Ok(out)
}

pub fn cross_entropy<T: Scalar>(logits: &[T], label: usize) -> Result<T> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let lse = max + logits.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
    Ok(lse - logits[label])
}

#[derive(Debug)]
struct NormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

fn layer_norm<T: Scalar>(x: &[T], dim: usize, gain: &[T], bias: &[T], out: &mut [T]) -> NormCache<T> {
    let rows = x.len() / dim;
    let eps = T::cst(LN_EPS);
    let n = T::cst(dim as f64);
    let mut xhat = vec![T::zero(); x.len()];
    let mut rstd = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * dim..(r + 1) * dim];
        let mean = row.iter().copied().sum::<T>() / n;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
        let rs = T::one() / (var + eps).sqrt();
        rstd.push(rs);
        for i in 0..dim {
            let h = (row[i] - mean) * rs;
            xhat[r * dim + i] = h;
            out[r * dim + i] = h * gain[i] + bias[i];
        }
    }
    NormCache { xhat, rstd }
}

/// Accumulates into `dx`, `dgain` and `dbias`.
fn layer_norm_backward<T: Scalar>(
    dy: &[T],
    dim: usize,
    cache: &NormCache<T>,
    gain: &[T],
    dgain: &mut [T],
    dbias: &mut [T],
    dx: &mut [T],
) {
    let n = T::cst(dim as f64);
    let mut dxhat = vec![T::zero(); dim];
    for (r, &rs) in cache.rstd.iter().enumerate() {
        let dy = &dy[r * dim..(r + 1) * dim];
        let xhat = &cache.xhat[r * dim..(r + 1) * dim];
        let mut mean_d = T::zero();
        let mut mean_dx = T::zero();
        for i in 0..dim {
            dgain[i] += dy[i] * xhat[i];
            dbias[i] += dy[i];
            dxhat[i] = dy[i] * gain[i];
            mean_d += dxhat[i];
            mean_dx += dxhat[i] * xhat[i];
        }
        mean_d = mean_d / n;
        mean_dx = mean_dx / n;
        let dx = &mut dx[r * dim..(r + 1) * dim];
        for i in 0..dim {
            dx[i] += rs * (dxhat[i] - mean_d - xhat[i] * mean_dx);
        }
    }
}

#[derive(Debug)]
struct BlockCache<T> {
    norm1: NormCache<T>,
    normed1: Vec<T>,
    /// `[heads][tokens × head_dim]`
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    /// `[heads][tokens × tokens]`
    attn: Vec<T>,
    /// `[tokens × heads·head_dim]`
    concat: Vec<T>,
    norm2: NormCache<T>,
    normed2: Vec<T>,
    pre_act: Vec<T>,
    act: Vec<T>,
}

/// Everything recorded by a forward pass: per-layer, per-head attention
/// matrices, the final class-token representation, and the activations
/// backpropagation needs.
#[derive(Debug)]
pub struct ForwardTrace<T = f32> {
    tokens: usize,
    heads: usize,
    patches: Tensor<T>,
    blocks: Vec<BlockCache<T>>,
    final_norm: NormCache<T>,
    representation: Vec<T>,
    logits: Vec<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn layers(&self) -> usize {
        self.blocks.len()
    }

    pub fn heads(&self) -> usize {
        self.heads
    }

    pub fn tokens(&self) -> usize {
        self.tokens
    }

    /// Row-major `tokens × tokens` attention of one head; row 0 is the class token.
    pub fn attention(&self, layer: usize, head: usize) -> &[T] {
        let tt = self.tokens * self.tokens;
        &self.blocks[layer].attn[head * tt..(head + 1) * tt]
    }

    /// Layer-normalized class-token row fed to the classifier.
    pub fn representation(&self) -> &[T] {
        &self.representation
    }

    pub fn logits(&self) -> &[T] {
        &self.logits
    }
}

/// Multi-head self-attention of `x` (`tokens × dim`). Writes `concat·W_O + beta·out`
/// into `out` and fills the per-head buffers.
#[allow(clippy::too_many_arguments)]
fn msa_into<T: Scalar>(
    x: &[T],
    tokens: usize,
    p: &BlockParams<T>,
    cfg: &ModelConfig,
    q: &mut [T],
    k: &mut [T],
    v: &mut [T],
    attn: &mut [T],
    concat: &mut [T],
    out: &mut [T],
    beta: T,
) {
    let (dim, hd, heads) = (cfg.dim, cfg.head_dim, cfg.heads);
    let hdd = heads * hd;
    let xm = MatRef::new(x, tokens, dim);
    let scale = T::one() / T::cst(hd as f64).sqrt();
    let (th, tt, w) = (tokens * hd, tokens * tokens, dim * hd);
    for h in 0..heads {
        let (qh, kh, vh) = (&mut q[h * th..(h + 1) * th], &mut k[h * th..(h + 1) * th], &mut v[h * th..(h + 1) * th]);
        gemm(xm, MatRef::new(&p.w_q.data()[h * w..(h + 1) * w], dim, hd), T::zero(), qh, hd);
        gemm(xm, MatRef::new(&p.w_k.data()[h * w..(h + 1) * w], dim, hd), T::zero(), kh, hd);
        gemm(xm, MatRef::new(&p.w_v.data()[h * w..(h + 1) * w], dim, hd), T::zero(), vh, hd);
        let ah = &mut attn[h * tt..(h + 1) * tt];
        gemm(MatRef::new(qh, tokens, hd), MatRef::new(kh, tokens, hd).t(), T::zero(), ah, tokens);
        ah.iter_mut().for_each(|s| *s *= scale);
        softmax_rows(ah, tokens);
        gemm(MatRef::new(ah, tokens, tokens), MatRef::new(vh, tokens, hd), T::zero(), &mut concat[h * hd..], hdd);
    }
    gemm(MatRef::new(concat, tokens, hdd), p.w_o.mat(), beta, out, dim);
}

/// `concat(head_1..head_h)·W_O` for `x` of shape `tokens × dim`, with the
/// per-head attention matrices.
pub fn msa<T: Scalar>(x: &Tensor<T>, p: &BlockParams<T>, cfg: &ModelConfig) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    if x.shape().len() != 2 || x.shape()[1] != cfg.dim {
        return Err(Error::ShapeMismatch(format!("MSA input {:?} for dim {}", x.shape(), cfg.dim)));
    }
    let t = x.shape()[0];
    let (heads, hd) = (cfg.heads, cfg.head_dim);
    let mut q = vec![T::zero(); heads * t * hd];
    let mut k = q.clone();
    let mut v = q.clone();
    let mut attn = vec![T::zero(); heads * t * t];
    let mut concat = vec![T::zero(); t * heads * hd];
    let mut out = Tensor::zeros(&[t, cfg.dim]);
    msa_into(x.data(), t, p, cfg, &mut q, &mut k, &mut v, &mut attn, &mut concat, out.data_mut(), T::zero());
    let maps = attn
        .chunks_exact(t * t)
        .map(|a| Tensor::from_vec(&[t, t], a.to_vec()).expect("square"))
        .collect();
    Ok((out, maps))
}

fn embed<T: Scalar>(patches: &Tensor<T>, params: &ViTParams<T>, cfg: &ModelConfig) -> Vec<T> {
    let dim = cfg.dim;
    let mut z = vec![T::zero(); cfg.tokens() * dim];
    gemm(patches.mat(), params.patch_embed.mat(), T::zero(), &mut z[dim..], dim);
    z[..dim].copy_from_slice(params.cls_token.data());
    for (a, &b) in z.iter_mut().zip(params.pos_embed.data()) {
        *a += b;
    }
    z
}

/// Applies block `l` to the token matrix `z` in place.
fn encoder_block<T: Scalar>(z: &mut [T], l: usize, p: &BlockParams<T>, cfg: &ModelConfig) -> Result<BlockCache<T>> {
    let (dim, heads, hd, hidden) = (cfg.dim, cfg.heads, cfg.head_dim, cfg.mlp_hidden);
    let tokens = z.len() / dim;
    let mut normed1 = vec![T::zero(); tokens * dim];
    let norm1 = layer_norm(z, dim, p.norm1_gain.data(), p.norm1_bias.data(), &mut normed1);
    let mut q = vec![T::zero(); heads * tokens * hd];
    let mut k = q.clone();
    let mut v = q.clone();
    let mut attn = vec![T::zero(); heads * tokens * tokens];
    let mut concat = vec![T::zero(); tokens * heads * hd];
    msa_into(&normed1, tokens, p, cfg, &mut q, &mut k, &mut v, &mut attn, &mut concat, z, T::one());

    let mut normed2 = vec![T::zero(); tokens * dim];
    let norm2 = layer_norm(z, dim, p.norm2_gain.data(), p.norm2_bias.data(), &mut normed2);
    let mut pre_act: Vec<T> = p.mlp_b1.data().iter().copied().cycle().take(tokens * hidden).collect();
    gemm(MatRef::new(&normed2, tokens, dim), p.mlp_w1.mat(), T::one(), &mut pre_act, hidden);
    let act: Vec<T> = pre_act.iter().map(|&x| gelu(x)).collect();
    for row in z.chunks_exact_mut(dim) {
        for (a, &b) in row.iter_mut().zip(p.mlp_b2.data()) {
            *a += b;
        }
    }
    gemm(MatRef::new(&act, tokens, hidden), p.mlp_w2.mat(), T::one(), z, dim);
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("encoder block {l}")));
    }
    Ok(BlockCache {
        norm1,
        normed1,
        q,
        k,
        v,
        attn,
        concat,
        norm2,
        normed2,
        pre_act,
        act,
    })
}

fn classify<T: Scalar>(z: &[T], params: &ViTParams<T>, cfg: &ModelConfig) -> Result<(NormCache<T>, Vec<T>, Vec<T>)> {
    let dim = cfg.dim;
    let mut representation = vec![T::zero(); dim];
    let final_norm = layer_norm(
        &z[..dim],
        dim,
        params.norm_gain.data(),
        params.norm_bias.data(),
        &mut representation,
    );
    let mut logits = params.head_bias.data().to_vec();
    gemm(
        MatRef::new(&representation, 1, dim),
        params.head_weight.mat(),
        T::one(),
        &mut logits,
        cfg.classes,
    );
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classifier head".into()));
    }
    Ok((final_norm, representation, logits))
}

/// Token matrices entering each block, followed by the encoder output.
pub(crate) fn block_inputs<T: Scalar>(patches: &Tensor<T>, params: &ViTParams<T>, cfg: &ModelConfig) -> Result<Vec<Vec<T>>> {
    let mut z = embed(patches, params, cfg);
    let mut out = vec![z.clone()];
    for (l, p) in params.blocks.iter().enumerate() {
        encoder_block(&mut z, l, p, cfg)?;
        out.push(z.clone());
    }
    Ok(out)
}

/// Loss when the token matrix entering block `start` is `z`.
pub(crate) fn loss_from_block<T: Scalar>(
    z: &[T],
    start: usize,
    params: &ViTParams<T>,
    cfg: &ModelConfig,
    label: usize,
) -> Result<T> {
    let mut z = z.to_vec();
    for (l, p) in params.blocks.iter().enumerate().skip(start) {
        encoder_block(&mut z, l, p, cfg)?;
    }
    let (_, _, logits) = classify(&z, params, cfg)?;
    cross_entropy(&logits, label)
}

/// Forward pass from an already patchified input (`num_patches × patch_dim`).
pub fn forward_patches<T: Scalar>(
    patches: &Tensor<T>,
    params: &ViTParams<T>,
    cfg: &ModelConfig,
) -> Result<ForwardTrace<T>> {
    let (n, pd) = (cfg.num_patches(), cfg.patch_dim());
    if patches.shape() != [n, pd] {
        return Err(Error::ShapeMismatch(format!(
            "patches {:?}, model expects [{n}, {pd}]",
            patches.shape()
        )));
    }
    let tokens = n + 1;
    let mut z = embed(patches, params, cfg);
    let mut blocks = Vec::with_capacity(cfg.layers);
    for (l, p) in params.blocks.iter().enumerate() {
        blocks.push(encoder_block(&mut z, l, p, cfg)?);
    }
    let (final_norm, representation, logits) = classify(&z, params, cfg)?;
    Ok(ForwardTrace {
        tokens,
        heads: cfg.heads,
        patches: patches.clone(),
        blocks,
        final_norm,
        representation,
        logits,
    })
}

/// Forward pass of one image; returns the logits and the trace.
pub fn forward(image: &Image, params: &ViTParams<f32>, cfg: &ModelConfig) -> Result<(Vec<f32>, ForwardTrace<f32>)> {
    if image.height != cfg.image_height || image.width != cfg.image_width || image.channels != cfg.channels {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} image for a {}x{}x{} model",
            image.width, image.height, image.channels, cfg.image_width, cfg.image_height, cfg.channels
        )));
    }
    let trace = forward_patches(&patchify(image, cfg.patch)?, params, cfg)?;
    Ok((trace.logits.clone(), trace))
}

/// Backpropagates `scale · cross_entropy(logits, label)` through a recorded
/// trace, accumulating into `grads`. Returns the unscaled loss.
pub fn backward_patches<T: Scalar>(
    trace: &ForwardTrace<T>,
    label: usize,
    params: &ViTParams<T>,
    cfg: &ModelConfig,
    scale: T,
    grads: &mut ViTParams<T>,
) -> Result<T> {
    let loss = cross_entropy(&trace.logits, label)?;
    let (dim, hd, heads, hidden) = (cfg.dim, cfg.head_dim, cfg.heads, cfg.mlp_hidden);
    let tokens = trace.tokens;
    let hdd = heads * hd;

    // Softmax cross-entropy gradient.
    let max = trace.logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let exps: Vec<T> = trace.logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    let mut dlogits: Vec<T> = exps.iter().map(|&e| scale * e / sum).collect();
    dlogits[label] -= scale;

    for (g, &d) in grads.head_bias.data_mut().iter_mut().zip(&dlogits) {
        *g += d;
    }
    gemm(
        MatRef::new(&trace.representation, 1, dim).t(),
        MatRef::new(&dlogits, 1, cfg.classes),
        T::one(),
        grads.head_weight.data_mut(),
        cfg.classes,
    );
    let mut drep = vec![T::zero(); dim];
    gemm(
        params.head_weight.mat(),
        MatRef::new(&dlogits, cfg.classes, 1),
        T::zero(),
        &mut drep,
        1,
    );

    let mut dz = vec![T::zero(); tokens * dim];
    layer_norm_backward(
        &drep,
        dim,
        &trace.final_norm,
        params.norm_gain.data(),
        grads.norm_gain.data_mut(),
        grads.norm_bias.data_mut(),
        &mut dz[..dim],
    );

    let scale_attn = T::one() / T::cst(hd as f64).sqrt();
    let (th, tt, w) = (tokens * hd, tokens * tokens, dim * hd);
    let mut dact = vec![T::zero(); tokens * hidden];
    let mut dnormed = vec![T::zero(); tokens * dim];
    let mut dconcat = vec![T::zero(); tokens * hdd];
    let mut dq = vec![T::zero(); th];
    let mut dk = vec![T::zero(); th];
    let mut dv = vec![T::zero(); th];
    let mut ds = vec![T::zero(); tt];

    for (l, (p, c)) in params.blocks.iter().zip(&trace.blocks).enumerate().rev() {
        let g = &mut grads.blocks[l];

        // z = z' + W2·gelu(W1·LN2(z') + b1) + b2
        for row in dz.chunks_exact(dim) {
            for (a, &b) in g.mlp_b2.data_mut().iter_mut().zip(row) {
                *a += b;
            }
        }
        gemm(
            MatRef::new(&c.act, tokens, hidden).t(),
            MatRef::new(&dz, tokens, dim),
            T::one(),
            g.mlp_w2.data_mut(),
            dim,
        );
        gemm(MatRef::new(&dz, tokens, dim), p.mlp_w2.mat().t(), T::zero(), &mut dact, hidden);
        for (d, &x) in dact.iter_mut().zip(&c.pre_act) {
            *d *= gelu_grad(x);
        }
        for row in dact.chunks_exact(hidden) {
            for (a, &b) in g.mlp_b1.data_mut().iter_mut().zip(row) {
                *a += b;
            }
        }
        gemm(
            MatRef::new(&c.normed2, tokens, dim).t(),
            MatRef::new(&dact, tokens, hidden),
            T::one(),
            g.mlp_w1.data_mut(),
            hidden,
        );
        gemm(MatRef::new(&dact, tokens, hidden), p.mlp_w1.mat().t(), T::zero(), &mut dnormed, dim);
        layer_norm_backward(
            &dnormed,
            dim,
            &c.norm2,
            p.norm2_gain.data(),
            g.norm2_gain.data_mut(),
            g.norm2_bias.data_mut(),
            &mut dz,
        );

        // z' = z + concat(heads)·W_O
        gemm(
            MatRef::new(&c.concat, tokens, hdd).t(),
            MatRef::new(&dz, tokens, dim),
            T::one(),
            g.w_o.data_mut(),
            dim,
        );
        gemm(MatRef::new(&dz, tokens, dim), p.w_o.mat().t(), T::zero(), &mut dconcat, hdd);

        dnormed.iter_mut().for_each(|v| *v = T::zero());
        let xm = MatRef::new(&c.normed1, tokens, dim);
        for h in 0..heads {
            let a = &c.attn[h * tt..(h + 1) * tt];
            let (qh, kh, vh) = (&c.q[h * th..(h + 1) * th], &c.k[h * th..(h + 1) * th], &c.v[h * th..(h + 1) * th]);
            let dout = MatRef::block(&dconcat, tokens, hdd, h * hd, hd);

            gemm(MatRef::new(a, tokens, tokens).t(), dout, T::zero(), &mut dv, hd);
            gemm(dout, MatRef::new(vh, tokens, hd).t(), T::zero(), &mut ds, tokens);
            for (srow, arow) in ds.chunks_exact_mut(tokens).zip(a.chunks_exact(tokens)) {
                let dot: T = srow.iter().zip(arow).map(|(&d, &p)| d * p).sum();
                for (s, &p) in srow.iter_mut().zip(arow) {
                    *s = p * (*s - dot) * scale_attn;
                }
            }
            gemm(MatRef::new(&ds, tokens, tokens), MatRef::new(kh, tokens, hd), T::zero(), &mut dq, hd);
            gemm(MatRef::new(&ds, tokens, tokens).t(), MatRef::new(qh, tokens, hd), T::zero(), &mut dk, hd);

            for (dproj, wt, gw) in [
                (&dq, &p.w_q, &mut g.w_q),
                (&dk, &p.w_k, &mut g.w_k),
                (&dv, &p.w_v, &mut g.w_v),
            ] {
                let dm = MatRef::new(dproj.as_slice(), tokens, hd);
                gemm(xm.t(), dm, T::one(), &mut gw.data_mut()[h * w..(h + 1) * w], hd);
                gemm(dm, MatRef::new(&wt.data()[h * w..(h + 1) * w], dim, hd).t(), T::one(), &mut dnormed, dim);
            }
        }
        layer_norm_backward(
            &dnormed,
            dim,
            &c.norm1,
            p.norm1_gain.data(),
            g.norm1_gain.data_mut(),
            g.norm1_bias.data_mut(),
            &mut dz,
        );
    }

    for (a, &b) in grads.pos_embed.data_mut().iter_mut().zip(&dz) {
        *a += b;
    }
    for (a, &b) in grads.cls_token.data_mut().iter_mut().zip(&dz[..dim]) {
        *a += b;
    }
    gemm(
        trace.patches.mat().t(),
        MatRef::new(&dz[dim..], tokens - 1, dim),
        T::one(),
        grads.patch_embed.data_mut(),
        dim,
    );
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok(loss)
}

/// Loss and analytic gradients of `cross_entropy(forward(image), label)`.
pub fn backward(
    image: &Image,
    label: usize,
    params: &ViTParams<f32>,
    cfg: &ModelConfig,
) -> Result<(f32, ViTParams<f32>)> {
    let (_, trace) = forward(image, params, cfg)?;
    let mut grads = ViTParams::zeros(cfg);
    let loss = backward_patches(&trace, label, params, cfg, 1.0, &mut grads)?;
    if !grads.all_finite() {
        return Err(Error::NonFinite("gradients".into()));
    }
    Ok((loss, grads))
}
