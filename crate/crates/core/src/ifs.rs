//! Iterated function systems: sampling, the chaos game, filling rate, and
//! rejection-sampled category search.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Orbits leaving this box are treated as divergent.
pub const DIVERGENCE_BOUND: f64 = 1e6;
/// Leading chaos-game iterations dropped before points are recorded.
pub const BURN_IN: usize = 100;
/// Fraction of the unit square left empty on each side after normalization.
pub const MARGIN: f64 = 0.05;
/// Lower bound on every map's selection probability.
pub const MIN_PROB: f64 = 0.01;
/// Seed of the chaos game used when judging a candidate's filling rate.
pub const VERIFICATION_SEED: u64 = 0x5EED_F111;
/// Resolution of the grid the filling rate is measured on during search.
pub const FILL_GRID: usize = 256;
pub const MAX_SEARCH_ATTEMPTS: usize = 10_000;
pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_POINTS: usize = 100_000;

/// `(x, y) -> (a·x + b·y + e, c·x + d·y + f)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub e: f64,
    pub f: f64,
}

impl AffineMap {
    pub fn new(a: f64, b: f64, c: f64, d: f64, e: f64, f: f64) -> Self {
        AffineMap { a, b, c, d, e, f }
    }

    pub fn from_params(p: [f64; 6]) -> Self {
        AffineMap::new(p[0], p[1], p[2], p[3], p[4], p[5])
    }

    pub fn params(&self) -> [f64; 6] {
        [self.a, self.b, self.c, self.d, self.e, self.f]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.b * y + self.e,
            self.c * x + self.d * y + self.f,
        )
    }

    fn is_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IfsSystem {
    maps: Vec<AffineMap>,
    probs: Vec<f64>,
}

impl IfsSystem {
    /// Builds a system whose probabilities follow the determinant rule.
    pub fn new(maps: Vec<AffineMap>) -> Result<Self> {
        Self::check_maps(&maps)?;
        let probs = det_probabilities(&maps);
        Ok(IfsSystem { maps, probs })
    }

    /// Builds a system with explicit probabilities.
    pub fn with_probs(maps: Vec<AffineMap>, probs: Vec<f64>) -> Result<Self> {
        Self::check_maps(&maps)?;
        if probs.len() != maps.len() {
            return Err(Error::InvalidArgument(format!(
                "{} probabilities for {} maps",
                probs.len(),
                maps.len()
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || probs.iter().any(|&p| !(p >= MIN_PROB)) {
            return Err(Error::InvalidArgument(format!(
                "probabilities must sum to 1 and be >= {MIN_PROB}: {probs:?}"
            )));
        }
        Ok(IfsSystem { maps, probs })
    }

    fn check_maps(maps: &[AffineMap]) -> Result<()> {
        if !(2..=8).contains(&maps.len()) {
            return Err(Error::InvalidArgument(format!(
                "an IFS needs 2 to 8 maps, got {}",
                maps.len()
            )));
        }
        if maps.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidArgument("non-finite map coefficient".into()));
        }
        Ok(())
    }

    pub fn maps(&self) -> &[AffineMap] {
        &self.maps
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The classic three-map Sierpinski gasket with equal probabilities.
    pub fn sierpinski() -> Self {
        let half = |e, f| AffineMap::new(0.5, 0.0, 0.0, 0.5, e, f);
        IfsSystem::new(vec![half(0.0, 0.0), half(0.5, 0.0), half(0.0, 0.5)])
            .expect("valid system")
    }
}

/// `p_i ∝ |det_i|`, then every probability is raised to [`MIN_PROB`] with the
/// remaining mass shared proportionally among the others.
pub fn det_probabilities(maps: &[AffineMap]) -> Vec<f64> {
    let n = maps.len();
    let weights: Vec<f64> = maps.iter().map(|m| m.det().abs()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return vec![1.0 / n as f64; n];
    }
    let mut floored = vec![false; n];
    loop {
        let free_mass = 1.0 - MIN_PROB * floored.iter().filter(|&&f| f).count() as f64;
        let free_weight: f64 = (0..n).filter(|&i| !floored[i]).map(|i| weights[i]).sum();
        let probs: Vec<f64> = (0..n)
            .map(|i| {
                if floored[i] {
                    MIN_PROB
                } else if free_weight > 0.0 {
                    free_mass * weights[i] / free_weight
                } else {
                    0.0
                }
            })
            .collect();
        let mut changed = false;
        for i in 0..n {
            if !floored[i] && probs[i] < MIN_PROB {
                floored[i] = true;
                changed = true;
            }
        }
        if !changed {
            return probs;
        }
    }
}

/// Draws every coefficient uniformly from `[-1, 1]`.
pub fn sample_ifs(rng_seed: u64, n_maps: usize) -> IfsSystem {
    assert!((2..=8).contains(&n_maps), "n_maps must be in 2..=8");
    let mut rng = seed::rng(rng_seed);
    let maps = (0..n_maps)
        .map(|_| {
            let mut p = [0.0; 6];
            for v in &mut p {
                *v = rng.random_range(-1.0..=1.0);
            }
            AffineMap::from_params(p)
        })
        .collect();
    IfsSystem::new(maps).expect("sampled maps are finite")
}

/// Chaos-game points normalized into the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<(f64, f64)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Yields the pixel each point falls into on a `width`×`height` grid.
    pub fn pixels(&self, width: usize, height: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.points
            .iter()
            .map(move |&(x, y)| (to_pixel(x, width), to_pixel(y, height)))
    }
}

#[inline]
fn to_pixel(v: f64, n: usize) -> usize {
    ((v * n as f64).floor().max(0.0) as usize).min(n - 1)
}

/// Runs `n_points` chaos-game iterations from the origin, keeping all but the
/// first [`BURN_IN`], and rescales the result (aspect preserved, centred) into
/// `[MARGIN, 1 - MARGIN]²`.
pub fn iterate(system: &IfsSystem, n_points: usize, seed: u64) -> Result<PointCloud> {
    let mut rng = seed::rng(seed);
    let mut cumulative = Vec::with_capacity(system.probs.len());
    let mut acc = 0.0;
    for p in &system.probs {
        acc += p;
        cumulative.push(acc);
    }
    let last = cumulative.len() - 1;

    let (mut x, mut y) = (0.0f64, 0.0f64);
    let mut points = Vec::with_capacity(n_points.saturating_sub(BURN_IN));
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for i in 0..n_points {
        let r: f64 = rng.random();
        let k = cumulative.iter().position(|&c| r < c).unwrap_or(last);
        (x, y) = system.maps[k].apply(x, y);
        if !(x.abs() <= DIVERGENCE_BOUND && y.abs() <= DIVERGENCE_BOUND) {
            return Err(Error::Divergent {
                bound: DIVERGENCE_BOUND,
            });
        }
        if i >= BURN_IN {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
            points.push((x, y));
        }
    }
    if points.is_empty() {
        return Err(Error::Degenerate);
    }
    let (w, h) = (xmax - xmin, ymax - ymin);
    let extent = w.max(h);
    if !(extent > 1e-12) {
        return Err(Error::Degenerate);
    }
    let span = 1.0 - 2.0 * MARGIN;
    let scale = span / extent;
    let ox = MARGIN + (span - w * scale) / 2.0;
    let oy = MARGIN + (span - h * scale) / 2.0;
    for p in &mut points {
        *p = (ox + (p.0 - xmin) * scale, oy + (p.1 - ymin) * scale);
    }
    Ok(PointCloud { points })
}

/// Fraction of grid pixels hit by at least one point.
pub fn filling_rate(cloud: &PointCloud, width: usize, height: usize) -> f64 {
    assert!(width >= 1 && height >= 1);
    let mut hit = vec![false; width * height];
    let mut count = 0usize;
    for (px, py) in cloud.pixels(width, height) {
        let cell = &mut hit[py * width + px];
        if !*cell {
            *cell = true;
            count += 1;
        }
    }
    count as f64 / (width * height) as f64
}

/// Samples candidate systems until one's filling rate on a
/// [`FILL_GRID`]² grid, measured with the [`VERIFICATION_SEED`] orbit,
/// reaches `threshold`. The number of maps is drawn uniformly from 2..=8.
pub fn search_category(rng_seed: u64, threshold: f64, n_points: usize) -> Result<IfsSystem> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!(
            "threshold {threshold} outside [0, 1)"
        )));
    }
    for attempt in 0..MAX_SEARCH_ATTEMPTS {
        let candidate_seed = seed::derive(&[rng_seed, tag::SEARCH, attempt as u64]);
        let n_maps = seed::rng(candidate_seed).random_range(2..=8usize);
        let system = sample_ifs(seed::derive(&[candidate_seed, 1]), n_maps);
        let Ok(cloud) = iterate(&system, n_points, VERIFICATION_SEED) else {
            continue;
        };
        if filling_rate(&cloud, FILL_GRID, FILL_GRID) >= threshold {
            return Ok(system);
        }
    }
    Err(Error::SearchExhausted {
        threshold,
        attempts: MAX_SEARCH_ATTEMPTS,
    })
}
