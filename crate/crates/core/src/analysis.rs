//! Diagnostics of a trained model: embedding filters, position-embedding
//! similarity, mean attention distance and class-token attention maps.

use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{write_atomic, Image};
use crate::seed;
use crate::vit::{forward, Checkpoint, ModelConfig};

/// Gap in pixels between tiles of a grid image.
const TILE_GAP: usize = 1;
pub const DEFAULT_PROBES: usize = 32;

/// Lays out equally sized tiles row by row with a black gap between them.
pub fn tile_images(tiles: &[Image], columns: usize) -> Result<Image> {
    let first = tiles
        .first()
        .ok_or_else(|| Error::InvalidArgument("no tiles to lay out".into()))?;
    let (tw, th, ch) = (first.width, first.height, first.channels);
    if tiles.iter().any(|t| (t.width, t.height, t.channels) != (tw, th, ch)) {
        return Err(Error::ShapeMismatch("tiles differ in size".into()));
    }
    let columns = columns.clamp(1, tiles.len());
    let rows = tiles.len().div_ceil(columns);
    let mut out = Image::new(
        columns * tw + (columns - 1) * TILE_GAP,
        rows * th + (rows - 1) * TILE_GAP,
        ch,
    );
    for (i, tile) in tiles.iter().enumerate() {
        let (ox, oy) = ((i % columns) * (tw + TILE_GAP), (i / columns) * (th + TILE_GAP));
        for y in 0..th {
            for x in 0..tw {
                out.set_pixel(ox + x, oy + y, tile.pixel(x, y));
            }
        }
    }
    Ok(out)
}

/// Maps values linearly so the minimum becomes 0 and the maximum 1. A
/// constant input maps to all zeros.
pub fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

fn to_byte(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// Principal components of the projection's columns.
    Pca,
    /// The projection's first columns as they are.
    Raw,
}

#[derive(Debug, Clone)]
pub struct FilterReport {
    /// Each filter in patch pixel layout (row, column, channel).
    pub filters: Vec<Vec<f64>>,
    /// Fraction of total variance per component; empty in raw mode.
    pub variance_ratio: Vec<f64>,
    pub image: Image,
}

impl FilterReport {
    pub fn variance_csv(&self) -> String {
        let mut s = String::from("component,variance_ratio\n");
        for (i, r) in self.variance_ratio.iter().enumerate() {
            s.push_str(&format!("{i},{r:.8}\n"));
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.image
            .write(&dir.join(format!("filters.{}", self.image.extension())))?;
        write_atomic(&dir.join("filters_variance.csv"), self.variance_csv().as_bytes())
    }
}

/// Principal directions of the columns of a row-major `rows`×`cols` matrix,
/// treating each column as one sample. Returns eigenvectors of the centred
/// covariance in decreasing eigenvalue order with the eigenvalues. Each
/// vector's largest-magnitude entry is made positive.
pub fn principal_components(data: &[f64], rows: usize, cols: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = DMatrix::from_row_slice(rows, cols, data);
    let mean = m.column_mean();
    let mut centred = m;
    for mut c in centred.column_iter_mut() {
        c -= &mean;
    }
    let cov = &centred * centred.transpose() / cols as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..rows).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vectors = order
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let peak = v.iter().copied().fold(0.0f64, |a, x| if x.abs() > a.abs() { x } else { a });
            if peak < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    (vectors, values)
}

fn filter_tile(filter: &[f64], cfg: &ModelConfig) -> Result<Image> {
    let data = min_max_normalize(filter).into_iter().map(to_byte).collect();
    Image::from_raw(cfg.patch, cfg.patch, cfg.channels, data)
}

/// The first `top_k` filters of the patch projection, tiled into one image.
pub fn embedding_filters(ckpt: &Checkpoint, top_k: usize, mode: FilterMode) -> Result<FilterReport> {
    let cfg = &ckpt.config;
    let e = &ckpt.params.patch_embed;
    let (pd, dim) = (cfg.patch_dim(), cfg.dim);
    if e.shape() != [pd, dim] {
        return Err(Error::ShapeMismatch(format!(
            "patch projection {:?}, expected [{pd}, {dim}]",
            e.shape()
        )));
    }
    let data: Vec<f64> = e.data().iter().map(|&v| v as f64).collect();
    let (filters, variance_ratio) = match mode {
        FilterMode::Pca => {
            let (vectors, values) = principal_components(&data, pd, dim);
            let total: f64 = values.iter().sum();
            let ratio = values
                .iter()
                .map(|v| if total > 0.0 { v / total } else { 0.0 })
                .collect();
            (vectors.into_iter().take(top_k.min(pd)).collect::<Vec<_>>(), ratio)
        }
        FilterMode::Raw => {
            let cols = (0..top_k.min(dim))
                .map(|j| (0..pd).map(|i| data[i * dim + j]).collect())
                .collect();
            (cols, Vec::new())
        }
    };
    if filters.is_empty() {
        return Err(Error::InvalidArgument("top_k must be at least 1".into()));
    }
    let tiles = filters
        .iter()
        .map(|f| filter_tile(f, cfg))
        .collect::<Result<Vec<_>>>()?;
    let columns = (tiles.len() as f64).sqrt().ceil() as usize;
    Ok(FilterReport {
        image: tile_images(&tiles, columns)?,
        filters,
        variance_ratio,
    })
}

/// Cosine similarity between the position embeddings of every pair of
/// patch positions; the class-token row is excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityGrid {
    pub grid: (usize, usize),
    /// Row-major `N`×`N`, `N = grid.0 · grid.1`.
    pub values: Vec<f64>,
}

impl SimilarityGrid {
    pub fn len(&self) -> usize {
        self.grid.0 * self.grid.1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    /// One tile per patch position, placed at that position, each showing
    /// its similarity to every position with [-1, 1] mapped to [0, 255].
    pub fn to_image(&self) -> Result<Image> {
        let (gh, gw) = self.grid;
        let n = self.len();
        let tiles = (0..n)
            .map(|i| {
                let data = self.values[i * n..(i + 1) * n]
                    .iter()
                    .map(|&v| to_byte((v + 1.0) / 2.0))
                    .collect();
                Image::from_raw(gw, gh, 1, data)
            })
            .collect::<Result<Vec<_>>>()?;
        tile_images(&tiles, gw)
    }

    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut s = String::new();
        for i in 0..n {
            let row: Vec<String> = self.values[i * n..(i + 1) * n].iter().map(|v| format!("{v:.6}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.to_image()?.write(&dir.join("possim.pgm"))?;
        write_atomic(&dir.join("possim.csv"), self.to_csv().as_bytes())
    }
}

/// Pairwise cosine similarity of the rows of a row-major `n`×`dim` matrix.
/// Zero rows have similarity 0 with everything except themselves.
pub fn cosine_matrix(rows: &[f64], n: usize, dim: usize) -> Vec<f64> {
    let norms: Vec<f64> = rows.chunks_exact(dim).map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = if i == j {
                1.0
            } else if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let dot: f64 = rows[i * dim..(i + 1) * dim]
                    .iter()
                    .zip(&rows[j * dim..(j + 1) * dim])
                    .map(|(a, b)| a * b)
                    .sum();
                (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0)
            };
            out[i * n + j] = v;
            out[j * n + i] = v;
        }
    }
    out
}

pub fn pos_embed_similarity(ckpt: &Checkpoint) -> Result<SimilarityGrid> {
    let cfg = &ckpt.config;
    let pos = &ckpt.params.pos_embed;
    let n = cfg.num_patches();
    if pos.shape() != [n + 1, cfg.dim] {
        return Err(Error::ShapeMismatch(format!(
            "position embedding {:?}, expected [{}, {}]",
            pos.shape(),
            n + 1,
            cfg.dim
        )));
    }
    let rows: Vec<f64> = pos.data()[cfg.dim..].iter().map(|&v| v as f64).collect();
    Ok(SimilarityGrid {
        grid: cfg.grid(),
        values: cosine_matrix(&rows, n, cfg.dim),
    })
}

/// Pixel coordinates of patch centres in row-major patch order.
pub fn patch_centers(grid: (usize, usize), patch: usize) -> Vec<(f64, f64)> {
    let (gh, gw) = grid;
    let half = patch as f64 / 2.0;
    (0..gh * gw)
        .map(|i| (((i % gw) * patch) as f64 + half, ((i / gw) * patch) as f64 + half))
        .collect()
}

/// Mean over query rows of the attention-weighted distance between patch
/// centres. `attn` is a row-major `N`×`N` patch-to-patch matrix; each row
/// is renormalized to sum to 1 and rows without mass contribute 0.
pub fn attention_distance(attn: &[f64], grid: (usize, usize), patch: usize) -> Result<f64> {
    let centers = patch_centers(grid, patch);
    let n = centers.len();
    if attn.len() != n * n {
        return Err(Error::ShapeMismatch(format!(
            "{} attention entries for {n} patches",
            attn.len()
        )));
    }
    let mut total = 0.0;
    for (i, row) in attn.chunks_exact(n).enumerate() {
        let mass: f64 = row.iter().sum();
        if !(mass > 0.0) {
            continue;
        }
        let (xi, yi) = centers[i];
        let weighted: f64 = row
            .iter()
            .zip(&centers)
            .map(|(a, &(xj, yj))| a * (xi - xj).hypot(yi - yj))
            .sum();
        total += weighted / mass;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDistanceReport {
    pub layers: usize,
    pub heads: usize,
    /// Row-major `layers`×`heads` distances in pixels.
    pub distances: Vec<f64>,
    pub image_diagonal: f64,
}

impl AttentionDistanceReport {
    pub fn get(&self, layer: usize, head: usize) -> f64 {
        self.distances[layer * self.heads + head]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("layer,head,distance_px\n");
        for l in 0..self.layers {
            for h in 0..self.heads {
                s.push_str(&format!("{l},{h},{:.6}\n", self.get(l, h)));
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        write_atomic(&dir.join("attention_distance.csv"), self.to_csv().as_bytes())
    }
}

fn check_image(image: &Image, cfg: &ModelConfig) -> Result<()> {
    if (image.width, image.height, image.channels) != (cfg.image_width, cfg.image_height, cfg.channels) {
        return Err(Error::ShapeMismatch(format!(
            "{}x{}x{} image for a {}x{}x{} model",
            image.width, image.height, image.channels, cfg.image_width, cfg.image_height, cfg.channels
        )));
    }
    Ok(())
}

/// Patch-to-patch block of a `T`×`T` token attention matrix.
fn patch_block(attn: &[f32], tokens: usize) -> Vec<f64> {
    (1..tokens)
        .flat_map(|i| attn[i * tokens + 1..(i + 1) * tokens].iter().map(|&v| v as f64))
        .collect()
}

pub fn mean_attention_distance(ckpt: &Checkpoint, probes: &[Image]) -> Result<AttentionDistanceReport> {
    let cfg = &ckpt.config;
    if probes.is_empty() {
        return Err(Error::InvalidArgument("at least one probe image is required".into()));
    }
    let per_probe = probes
        .par_iter()
        .map(|img| -> Result<Vec<f64>> {
            check_image(img, cfg)?;
            let (_, trace) = forward(img, &ckpt.params, cfg)?;
            let mut out = Vec::with_capacity(cfg.layers * cfg.heads);
            for l in 0..cfg.layers {
                for h in 0..cfg.heads {
                    let block = patch_block(trace.attention(l, h), cfg.tokens());
                    out.push(attention_distance(&block, cfg.grid(), cfg.patch)?);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut distances = vec![0.0; cfg.layers * cfg.heads];
    for d in &per_probe {
        for (acc, v) in distances.iter_mut().zip(d) {
            *acc += v;
        }
    }
    distances.iter_mut().for_each(|d| *d /= probes.len() as f64);
    Ok(AttentionDistanceReport {
        layers: cfg.layers,
        heads: cfg.heads,
        distances,
        image_diagonal: cfg.image_diagonal(),
    })
}

/// `n` distinct indices below `len`, fixed by `seed_value`, in ascending order.
pub fn select_probes(len: usize, n: usize, seed_value: u64) -> Vec<usize> {
    let mut idx = sample(&mut seed::rng(seed_value), len, n.min(len)).into_vec();
    idx.sort_unstable();
    idx
}

/// Bilinear resampling of a row-major `gh`×`gw` grid to `height`×`width`,
/// sampling at pixel centres.
pub fn upsample_bilinear(grid: &[f64], gh: usize, gw: usize, height: usize, width: usize) -> Vec<f64> {
    let coord = |i: usize, n_out: usize, n_in: usize| {
        let f = ((i as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5).clamp(0.0, (n_in - 1) as f64);
        let i0 = f.floor() as usize;
        (i0, (i0 + 1).min(n_in - 1), f - i0 as f64)
    };
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let (r0, r1, ty) = coord(y, height, gh);
        for x in 0..width {
            let (c0, c1, tx) = coord(x, width, gw);
            let at = |r: usize, c: usize| grid[r * gw + c];
            let top = at(r0, c0) * (1.0 - tx) + at(r0, c1) * tx;
            let bottom = at(r1, c0) * (1.0 - tx) + at(r1, c1) * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct AttentionMap {
    /// Head-averaged class-token attention over patches, row-major grid.
    pub grid_weights: Vec<f64>,
    /// Per-pixel heat in [0, 1], row-major at image resolution.
    pub heat: Vec<f64>,
    pub image: Image,
}

impl AttentionMap {
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.image
            .write(&dir.join(format!("attention_map.{}", self.image.extension())))
    }
}

/// Heat image from class-token weights over a patch grid. With `overlay`,
/// the heat is blended 50/50 with `base`.
pub fn render_heatmap(
    grid_weights: &[f64],
    grid: (usize, usize),
    base: &Image,
    overlay: bool,
) -> Result<AttentionMap> {
    let (gh, gw) = grid;
    if grid_weights.len() != gh * gw {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for a {gh}x{gw} grid",
            grid_weights.len()
        )));
    }
    let up = upsample_bilinear(grid_weights, gh, gw, base.height, base.width);
    let heat = min_max_normalize(&up);
    let image = if overlay {
        let c = base.channels;
        let data = base
            .data
            .iter()
            .enumerate()
            .map(|(i, &p)| to_byte(0.5 * p as f64 / 255.0 + 0.5 * heat[i / c]))
            .collect();
        Image::from_raw(base.width, base.height, c, data)?
    } else {
        Image::from_raw(base.width, base.height, 1, heat.iter().map(|&h| to_byte(h)).collect())?
    };
    Ok(AttentionMap {
        grid_weights: grid_weights.to_vec(),
        heat,
        image,
    })
}

/// Final-layer class-token attention averaged over heads.
pub fn attention_map(ckpt: &Checkpoint, image: &Image, overlay: bool) -> Result<AttentionMap> {
    let cfg = &ckpt.config;
    check_image(image, cfg)?;
    let (_, trace) = forward(image, &ckpt.params, cfg)?;
    let t = cfg.tokens();
    let mut weights = vec![0.0; t - 1];
    for h in 0..cfg.heads {
        let attn = trace.attention(cfg.layers - 1, h);
        for (w, &a) in weights.iter_mut().zip(&attn[1..t]) {
            *w += a as f64 / cfg.heads as f64;
        }
    }
    render_heatmap(&weights, cfg.grid(), image, overlay)
}

/// Occupied pixels grown by `radius` in the Chebyshev metric.
pub fn dilated_foreground(image: &Image, radius: usize) -> Vec<bool> {
    let (w, h) = (image.width, image.height);
    let on: Vec<bool> = (0..w * h)
        .map(|i| image.data[i * image.channels..(i + 1) * image.channels].iter().any(|&v| v > 0))
        .collect();
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if !on[y * w + x] {
                continue;
            }
            for yy in y.saturating_sub(radius)..(y + radius + 1).min(h) {
                for xx in x.saturating_sub(radius)..(x + radius + 1).min(w) {
                    out[yy * w + xx] = true;
                }
            }
        }
    }
    out
}

/// Share of total heat lying on masked pixels; 0 when there is no heat.
pub fn mass_fraction(heat: &[f64], mask: &[bool]) -> f64 {
    let total: f64 = heat.iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    heat.iter().zip(mask).filter(|(_, &m)| m).map(|(h, _)| h).sum::<f64>() / total
}
