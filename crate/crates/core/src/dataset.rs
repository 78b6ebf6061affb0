//! FractalDB-style dataset generation.
//!
//! Each category is one accepted IFS. Its 1,000 instances come from three
//! independent augmentations: 25 parameter variants (the original plus each of
//! the six coefficients of map 0 scaled by four weights), 4 flips, and 10
//! stamping patches.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ifs::{self, AffineMap, IfsSystem};
use crate::image::{write_atomic, Image};
use crate::seed::{self, tag};

pub const VARIANTS: usize = 25;
pub const FLIPS: usize = 4;
pub const PATCHES: usize = 10;
pub const INSTANCES_PER_CATEGORY: usize = VARIANTS * FLIPS * PATCHES;
pub const DEFAULT_WEIGHTS: [f64; 4] = [0.8, 0.9, 1.1, 1.2];
pub const DEFAULT_IMAGE_SIZE: usize = 256;
pub const FORMAT_VERSION: u32 = 1;
/// Fresh chaos-game seeds tried for one instance before giving up.
pub const MAX_SEED_BUMPS: u32 = 16;
/// Category searches restarted when a variant of the accepted system is not renderable.
const MAX_CATEGORY_RETRIES: u64 = 64;

/// Position of one instance in the 25×4×10 enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct InstanceSpec {
    pub variant: u8,
    pub flip: u8,
    pub patch_id: u8,
}

impl InstanceSpec {
    /// Variant-major, then flip, then patch.
    pub fn from_index(index: usize) -> Self {
        assert!(index < INSTANCES_PER_CATEGORY, "instance index {index} out of range");
        InstanceSpec {
            variant: (index / (FLIPS * PATCHES)) as u8,
            flip: ((index / PATCHES) % FLIPS) as u8,
            patch_id: (index % PATCHES) as u8,
        }
    }

    pub fn index(&self) -> usize {
        (self.variant as usize * FLIPS + self.flip as usize) * PATCHES + self.patch_id as usize
    }

    pub fn all() -> impl Iterator<Item = InstanceSpec> {
        (0..INSTANCES_PER_CATEGORY).map(InstanceSpec::from_index)
    }
}

/// 3×3 binary stamp. Bit `row * 3 + col` is set when the cell is drawn; the
/// centre bit is always set so a stamp covers at least its own point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchMask(pub u16);

impl PatchMask {
    pub fn cell(&self, row: usize, col: usize) -> bool {
        self.0 >> (row * 3 + col) & 1 == 1
    }

    pub fn count(&self) -> u32 {
        (self.0 & 0x1FF).count_ones()
    }
}

/// The ten stamping masks, drawn once from a fixed seed and frozen here.
pub const PATCH_MASKS: [PatchMask; PATCHES] = [
    PatchMask(0b110110111),
    PatchMask(0b011011010),
    PatchMask(0b000010101),
    PatchMask(0b000010100),
    PatchMask(0b110110110),
    PatchMask(0b100110001),
    PatchMask(0b101010101),
    PatchMask(0b100111011),
    PatchMask(0b001111100),
    PatchMask(0b000111001),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchSet {
    patches: Vec<PatchMask>,
}

impl PatchSet {
    pub fn new(patches: Vec<PatchMask>) -> Result<Self> {
        if patches.len() != PATCHES {
            return Err(Error::InvalidArgument(format!("need {PATCHES} patches")));
        }
        for (i, p) in patches.iter().enumerate() {
            if p.0 > 0x1FF || p.count() == 0 || patches[..i].contains(p) {
                return Err(Error::InvalidArgument(format!("invalid or duplicate patch {i}")));
            }
        }
        Ok(PatchSet { patches })
    }

    pub fn get(&self, id: usize) -> PatchMask {
        self.patches[id]
    }
}

impl Default for PatchSet {
    fn default() -> Self {
        PatchSet::new(PATCH_MASKS.to_vec()).expect("frozen masks are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    Point,
    Patch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorMode {
    Grayscale,
    Color,
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderMode::Point => "point",
            RenderMode::Patch => "patch",
        })
    }
}

impl FromStr for RenderMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "point" => Ok(RenderMode::Point),
            "patch" => Ok(RenderMode::Patch),
            _ => Err(Error::InvalidArgument(format!("unknown render mode {s:?}"))),
        }
    }
}

impl fmt::Display for ColorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColorMode::Grayscale => "gray",
            ColorMode::Color => "color",
        })
    }
}

impl FromStr for ColorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray" | "grayscale" => Ok(ColorMode::Grayscale),
            "color" => Ok(ColorMode::Color),
            _ => Err(Error::InvalidArgument(format!("unknown color mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub image_size: usize,
    pub mode: RenderMode,
    pub color: ColorMode,
    pub n_points: usize,
    pub color_seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            image_size: DEFAULT_IMAGE_SIZE,
            mode: RenderMode::Patch,
            color: ColorMode::Grayscale,
            n_points: ifs::DEFAULT_POINTS,
            color_seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 32 {
            return Err(Error::InvalidArgument(format!(
                "image size {} below 32",
                self.image_size
            )));
        }
        if self.n_points < 1000 {
            return Err(Error::InvalidArgument(format!(
                "{} points below the 1000 minimum",
                self.n_points
            )));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        match self.color {
            ColorMode::Grayscale => 1,
            ColorMode::Color => 3,
        }
    }
}

/// Copy of `system` with coefficient `param_index` (a..f) of map `map_index`
/// multiplied by `weight`; probabilities follow the determinant rule again.
pub fn vary_params(system: &IfsSystem, map_index: usize, param_index: usize, weight: f64) -> IfsSystem {
    assert!(param_index < 6, "param_index must be in 0..6");
    let mut maps = system.maps().to_vec();
    let mut p = maps[map_index].params();
    p[param_index] *= weight;
    maps[map_index] = AffineMap::from_params(p);
    IfsSystem::new(maps).expect("scaling a finite coefficient keeps the system valid")
}

/// `[original] ++ [vary_params(system, 0, p, w) for p in 0..6 for w in weights]`.
pub fn enumerate_variants(system: &IfsSystem, weights: &[f64; 4]) -> Vec<IfsSystem> {
    let mut out = Vec::with_capacity(VARIANTS);
    out.push(system.clone());
    for p in 0..6 {
        for &w in weights {
            out.push(vary_params(system, 0, p, w));
        }
    }
    out
}

/// 0 = identity, 1 = horizontal mirror, 2 = vertical mirror, 3 = both.
pub fn apply_flip(image: &Image, flip: u8) -> Image {
    match flip {
        0 => image.clone(),
        1 => image.flip_horizontal(),
        2 => image.flip_vertical(),
        3 => image.flip_horizontal().flip_vertical(),
        _ => panic!("flip must be in 0..4, got {flip}"),
    }
}

/// Uniform over the 6-bit-per-channel cube, rejecting colours whose channels
/// are all below 32.
fn random_color(rng: &mut seed::Rng) -> [u8; 3] {
    loop {
        let mut rgb = [0u8; 3];
        for v in &mut rgb {
            let level: u32 = rng.random_range(0..64);
            *v = ((level * 255 + 31) / 63) as u8;
        }
        if rgb.iter().any(|&v| v >= 32) {
            return rgb;
        }
    }
}

/// Renders one instance of an already-varied system. The chaos game uses
/// `seed`; colours (colour mode only) come from a separate stream so gray and
/// colour renders of the same seed share geometry.
pub fn render_instance(
    system: &IfsSystem,
    spec: InstanceSpec,
    cfg: &RenderConfig,
    patches: &PatchSet,
    seed: u64,
) -> Result<Image> {
    let cloud = ifs::iterate(system, cfg.n_points, seed)?;
    let size = cfg.image_size;
    let mut img = Image::new(size, size, cfg.channels());
    let mut colors = seed::rng(seed::derive(&[seed, tag::COLOR, cfg.color_seed]));
    let mask = patches.get(spec.patch_id as usize);
    for (px, py) in cloud.pixels(size, size) {
        let value: [u8; 3] = match cfg.color {
            ColorMode::Grayscale => [255; 3],
            ColorMode::Color => random_color(&mut colors),
        };
        let value = &value[..img.channels];
        match cfg.mode {
            RenderMode::Point => img.set_pixel(px, py, value),
            RenderMode::Patch => {
                for row in 0..3 {
                    for col in 0..3 {
                        if !mask.cell(row, col) {
                            continue;
                        }
                        let (x, y) = (px as isize + col as isize - 1, py as isize + row as isize - 1);
                        if x >= 0 && y >= 0 && (x as usize) < size && (y as usize) < size {
                            img.set_pixel(x as usize, y as usize, value);
                        }
                    }
                }
            }
        }
    }
    Ok(apply_flip(&img, spec.flip))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRecord {
    pub category_id: usize,
    pub system: IfsSystem,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceRecord {
    pub category_id: usize,
    pub spec: InstanceSpec,
    pub relative_path: String,
    /// How many times the chaos-game seed had to be bumped.
    pub seed_bump: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationConfig {
    pub n_categories: usize,
    pub n_instances: usize,
    pub render: RenderConfig,
    pub threshold: f64,
    pub global_seed: u64,
    pub weights: [f64; 4],
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        self.render.validate()?;
        if self.n_categories == 0 {
            return Err(Error::InvalidArgument("need at least one category".into()));
        }
        if self.n_instances == 0 || self.n_instances > INSTANCES_PER_CATEGORY {
            return Err(Error::InvalidArgument(format!(
                "instances per category must be in 1..={INSTANCES_PER_CATEGORY}"
            )));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::InvalidArgument(format!(
                "threshold {} outside [0, 1)",
                self.threshold
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub config: GenerationConfig,
    pub categories: Vec<CategoryRecord>,
    pub instances: Vec<InstanceRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.csv";
pub const CATEGORIES_FILE: &str = "categories.csv";
pub const META_FILE: &str = "meta.txt";

pub fn category_seed(global_seed: u64, category: usize) -> u64 {
    seed::derive(&[global_seed, tag::CATEGORY, category as u64])
}

pub fn instance_seed(category_seed: u64, index: usize, bump: u32) -> u64 {
    seed::derive(&[category_seed, tag::INSTANCE, index as u64, bump as u64])
}

/// Searches category `k` and requires every parameter variant to iterate
/// without diverging, restarting the search from a derived seed otherwise.
pub fn search_renderable_category(
    cat_seed: u64,
    threshold: f64,
    n_points: usize,
    weights: &[f64; 4],
) -> Result<IfsSystem> {
    let mut last_err = None;
    for retry in 0..MAX_CATEGORY_RETRIES {
        let system = ifs::search_category(seed::derive(&[cat_seed, retry]), threshold, n_points)?;
        let renderable = enumerate_variants(&system, weights)
            .iter()
            .all(|v| ifs::iterate(v, n_points, ifs::VERIFICATION_SEED).is_ok());
        if renderable {
            return Ok(system);
        }
        last_err = Some(Error::SearchExhausted {
            threshold,
            attempts: retry as usize + 1,
        });
    }
    Err(last_err.expect("at least one retry"))
}

/// Renders every instance of one category; returns the images with their records.
pub fn render_category(
    category_id: usize,
    system: &IfsSystem,
    cfg: &GenerationConfig,
    patches: &PatchSet,
) -> Result<Vec<(InstanceRecord, Image)>> {
    let cat_seed = category_seed(cfg.global_seed, category_id);
    let variants = enumerate_variants(system, &cfg.weights);
    let ext = match cfg.render.color {
        ColorMode::Grayscale => "pgm",
        ColorMode::Color => "ppm",
    };
    (0..cfg.n_instances)
        .map(|j| {
            let spec = InstanceSpec::from_index(j);
            let variant = &variants[spec.variant as usize];
            let mut bump = 0;
            let image = loop {
                match render_instance(variant, spec, &cfg.render, patches, instance_seed(cat_seed, j, bump)) {
                    Ok(img) => break img,
                    Err(Error::Divergent { .. } | Error::Degenerate) if bump + 1 < MAX_SEED_BUMPS => bump += 1,
                    Err(e) => return Err(e),
                }
            };
            let record = InstanceRecord {
                category_id,
                spec,
                relative_path: format!("cat{category_id:05}/ins{j:04}.{ext}"),
                seed_bump: bump,
            };
            Ok((record, image))
        })
        .collect()
}

/// Generates and writes the dataset. Categories are independent and rendered
/// in parallel; output does not depend on scheduling.
pub fn generate_dataset(cfg: &GenerationConfig, out_dir: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let patches = PatchSet::default();
    let per_category: Vec<(CategoryRecord, Vec<InstanceRecord>)> = (0..cfg.n_categories)
        .into_par_iter()
        .map(|k| -> Result<_> {
            let wrap = |e: Error| Error::Category {
                category: k,
                source: Box::new(e),
            };
            let cat_seed = category_seed(cfg.global_seed, k);
            let system =
                search_renderable_category(cat_seed, cfg.threshold, cfg.render.n_points, &cfg.weights)
                    .map_err(wrap)?;
            let rendered = render_category(k, &system, cfg, &patches).map_err(wrap)?;
            let mut records = Vec::with_capacity(rendered.len());
            for (record, image) in rendered {
                image.write(&out_dir.join(&record.relative_path))?;
                records.push(record);
            }
            Ok((
                CategoryRecord {
                    category_id: k,
                    system,
                },
                records,
            ))
        })
        .collect::<Result<_>>()?;

    let mut manifest = DatasetManifest {
        config: cfg.clone(),
        categories: Vec::with_capacity(cfg.n_categories),
        instances: Vec::with_capacity(cfg.n_categories * cfg.n_instances),
    };
    for (cat, instances) in per_category {
        manifest.categories.push(cat);
        manifest.instances.extend(instances);
    }
    manifest.write(out_dir)?;
    Ok(manifest)
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.categories.len()
    }

    pub fn manifest_csv(&self) -> String {
        let mut s = String::from("category_id,variant,flip,patch_id,relative_path,seed_bump\n");
        for r in &self.instances {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.category_id, r.spec.variant, r.spec.flip, r.spec.patch_id, r.relative_path, r.seed_bump
            ));
        }
        s
    }

    pub fn categories_csv(&self) -> String {
        let mut s = String::from("category_id,map_index,a,b,c,d,e,f,p\n");
        for cat in &self.categories {
            for (i, (m, p)) in cat.system.maps().iter().zip(cat.system.probs()).enumerate() {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    cat.category_id, i, m.a, m.b, m.c, m.d, m.e, m.f, p
                ));
            }
        }
        s
    }

    pub fn meta(&self) -> String {
        let c = &self.config;
        let w = c.weights;
        format!(
            "format_version={FORMAT_VERSION}\ncategories={}\ninstances={}\nimage_size={}\nrender={}\n\
             colormode={}\npoints={}\ncolor_seed={}\nthreshold={}\nglobal_seed={}\nweights={},{},{},{}\n",
            c.n_categories,
            c.n_instances,
            c.render.image_size,
            c.render.mode,
            c.render.color,
            c.render.n_points,
            c.render.color_seed,
            c.threshold,
            c.global_seed,
            w[0],
            w[1],
            w[2],
            w[3],
        )
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        write_atomic(&out_dir.join(MANIFEST_FILE), self.manifest_csv().as_bytes())?;
        write_atomic(&out_dir.join(CATEGORIES_FILE), self.categories_csv().as_bytes())?;
        write_atomic(&out_dir.join(META_FILE), self.meta().as_bytes())
    }

    pub fn load(dir: &Path) -> Result<DatasetManifest> {
        let read = |name: &str| -> Result<(PathBuf, String)> {
            let path = dir.join(name);
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            Ok((path, text))
        };

        let (meta_path, meta_text) = read(META_FILE)?;
        let meta = parse_key_values(&meta_text);
        let bad = |path: &Path, msg: String| Error::format("dataset", path, msg);
        let get = |key: &str| -> Result<&str> {
            meta.get(key)
                .map(String::as_str)
                .ok_or_else(|| bad(&meta_path, format!("missing key {key}")))
        };
        fn num<T: FromStr>(v: &str, path: &Path, key: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::format("dataset", path, format!("bad value for {key}: {v:?}")))
        }
        let version: u32 = num(get("format_version")?, &meta_path, "format_version")?;
        if version != FORMAT_VERSION {
            return Err(bad(&meta_path, format!("unsupported format version {version}")));
        }
        let weights: Vec<f64> = get("weights")?
            .split(',')
            .map(|w| num(w, &meta_path, "weights"))
            .collect::<Result<_>>()?;
        let weights: [f64; 4] = weights
            .try_into()
            .map_err(|_| bad(&meta_path, "expected 4 weights".into()))?;
        let config = GenerationConfig {
            n_categories: num(get("categories")?, &meta_path, "categories")?,
            n_instances: num(get("instances")?, &meta_path, "instances")?,
            render: RenderConfig {
                image_size: num(get("image_size")?, &meta_path, "image_size")?,
                mode: get("render")?.parse()?,
                color: get("colormode")?.parse()?,
                n_points: num(get("points")?, &meta_path, "points")?,
                color_seed: num(get("color_seed")?, &meta_path, "color_seed")?,
            },
            threshold: num(get("threshold")?, &meta_path, "threshold")?,
            global_seed: num(get("global_seed")?, &meta_path, "global_seed")?,
            weights,
        };

        let (cat_path, cat_text) = read(CATEGORIES_FILE)?;
        let mut maps: BTreeMap<usize, Vec<(AffineMap, f64)>> = BTreeMap::new();
        for (line_no, line) in cat_text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad(&cat_path, format!("line {}: expected 9 fields", line_no + 1)));
            }
            let id: usize = num(f[0], &cat_path, "category_id")?;
            let mut p = [0.0; 6];
            for (i, v) in p.iter_mut().enumerate() {
                *v = num(f[2 + i], &cat_path, "coefficient")?;
            }
            let prob: f64 = num(f[8], &cat_path, "p")?;
            maps.entry(id).or_default().push((AffineMap::from_params(p), prob));
        }
        let categories = maps
            .into_iter()
            .map(|(category_id, entries)| {
                let (m, p): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
                Ok(CategoryRecord {
                    category_id,
                    system: IfsSystem::with_probs(m, p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if categories.iter().enumerate().any(|(i, c)| c.category_id != i) {
            return Err(bad(&cat_path, "category ids are not contiguous from 0".into()));
        }

        let (man_path, man_text) = read(MANIFEST_FILE)?;
        let mut instances = Vec::new();
        for (line_no, line) in man_text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(bad(&man_path, format!("line {}: expected 6 fields", line_no + 1)));
            }
            let spec = InstanceSpec {
                variant: num(f[1], &man_path, "variant")?,
                flip: num(f[2], &man_path, "flip")?,
                patch_id: num(f[3], &man_path, "patch_id")?,
            };
            if spec.variant as usize >= VARIANTS || spec.flip as usize >= FLIPS || spec.patch_id as usize >= PATCHES {
                return Err(bad(&man_path, format!("line {}: instance out of range", line_no + 1)));
            }
            let category_id: usize = num(f[0], &man_path, "category_id")?;
            if category_id >= categories.len() {
                return Err(bad(&man_path, format!("line {}: unknown category", line_no + 1)));
            }
            instances.push(InstanceRecord {
                category_id,
                spec,
                relative_path: f[4].to_string(),
                seed_bump: num(f[5], &man_path, "seed_bump")?,
            });
        }
        Ok(DatasetManifest {
            config,
            categories,
            instances,
        })
    }
}

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
pub fn parse_key_values(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}
