//! Block-based texture segmentation: tile the field, fit a model per block,
//! cluster the per-block coefficient vectors with k-means, and emit block-
//! and pixel-level label maps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{zero_mean, Field, ModelOrder};
use crate::ywls::{estimate, ArmaFit};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Blocks whose variance falls below this fraction of the whole-field
/// variance are marked invalid instead of being fit.
const DEGENERATE_BLOCK_RATIO: f64 = 1e-10;

const KMEANS_MAX_ITERATIONS: usize = 100;
const KMEANS_RELATIVE_TOLERANCE: f64 = 1e-6;

/// Default per-block model: AR(2,2) with truncation order 3.
///
/// A low-order pure-AR fit is what separates textures reliably inside a
/// 16x16 window; per-block ARMA fits leave the MA coefficients essentially
/// unidentified on weakly correlated blocks and the resulting scatter
/// swamps the class structure.
pub fn default_block_order() -> ModelOrder {
    ModelOrder::new(2, 2, 0, 0, 3, 3).expect("static order is valid")
}

/// Tiling and per-block model settings for feature extraction.
#[derive(Debug, Clone)]
pub struct SegmentConfig {
    pub order: ModelOrder,
    pub block_size: usize,
    /// Tiling step; equal to `block_size` for non-overlapping blocks.
    pub stride: usize,
    /// Append `ln(sigma2_hat)` to each feature vector.
    pub include_sigma: bool,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            order: default_block_order(),
            block_size: 16,
            stride: 16,
            include_sigma: true,
        }
    }
}

impl SegmentConfig {
    pub fn new(order: ModelOrder, block_size: usize) -> Self {
        Self {
            order,
            block_size,
            stride: block_size,
            include_sigma: true,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn without_sigma_feature(mut self) -> Self {
        self.include_sigma = false;
        self
    }

    fn feature_dim(&self) -> usize {
        self.order.theta_len() + usize::from(self.include_sigma)
    }

    fn validate(&self, n1: usize, n2: usize) -> Result<(usize, usize)> {
        let bs = self.block_size;
        let o = &self.order;
        let need1 = o.k1 + o.q1 + o.p1 + 2;
        let need2 = o.k2 + o.q2 + o.p2 + 2;
        if bs < need1 || bs < need2 {
            return Err(Error::BlockTooSmall {
                block_size: bs,
                reason: format!(
                    "the order margins need at least {}x{} samples",
                    need1, need2
                ),
            });
        }
        let (l, m) = o.margins();
        let rows = (bs - 1 - l) * (bs - 1 - m);
        if rows < o.theta_len() {
            return Err(Error::BlockTooSmall {
                block_size: bs,
                reason: format!("{rows} regression rows for {} unknowns", o.theta_len()),
            });
        }
        if self.stride == 0 || self.stride > bs {
            return Err(Error::InvalidConfig(format!(
                "stride {} must be in [1, block_size]",
                self.stride
            )));
        }
        if n1 < bs || n2 < bs {
            return Err(Error::BlockTooSmall {
                block_size: bs,
                reason: format!("field is only {n1}x{n2}"),
            });
        }
        Ok(((n1 - bs) / self.stride + 1, (n2 - bs) / self.stride + 1))
    }
}

/// One tile's fit. `fit` is `None` for degenerate blocks (near-zero
/// variance) and for blocks where the estimation failed numerically.
#[derive(Debug, Clone)]
pub struct BlockFit {
    pub row: usize,
    pub col: usize,
    /// Pixel coordinates of the block's top-left corner.
    pub y0: usize,
    pub x0: usize,
    /// Mean removed from the block before fitting.
    pub mean: f64,
    pub fit: Option<ArmaFit>,
}

/// Fits every block of the tiling in parallel; results are ordered by block
/// index, so the output is independent of the worker count.
pub fn fit_blocks(field: &Field, config: &SegmentConfig) -> Result<Vec<BlockFit>> {
    let (grid_h, grid_w) = config.validate(field.height(), field.width())?;
    let global_variance = field.variance();
    let bs = config.block_size;
    let fits: Vec<BlockFit> = (0..grid_h * grid_w)
        .into_par_iter()
        .map(|idx| {
            let row = idx / grid_w;
            let col = idx % grid_w;
            let y0 = row * config.stride;
            let x0 = col * config.stride;
            let block = field
                .crop(y0, x0, bs, bs)
                .expect("validated tiling stays in bounds");
            let (block, mean) = zero_mean(&block);
            let degenerate = block.variance() < DEGENERATE_BLOCK_RATIO * global_variance
                || global_variance == 0.0;
            let fit = if degenerate {
                None
            } else {
                estimate(&block, &config.order).ok()
            };
            BlockFit {
                row,
                col,
                y0,
                x0,
                mean,
                fit,
            }
        })
        .collect();
    Ok(fits)
}

/// Per-block feature vectors plus the tiling geometry they came from.
#[derive(Debug, Clone)]
pub struct BlockFeatures {
    grid_h: usize,
    grid_w: usize,
    block_size: usize,
    stride: usize,
    n1: usize,
    n2: usize,
    dim: usize,
    /// Row-major by block index; invalid blocks hold zeros.
    features: Vec<f64>,
    valid: Vec<bool>,
}

impl BlockFeatures {
    /// Assembles a feature set from raw parts, checking shape consistency.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid_h: usize,
        grid_w: usize,
        block_size: usize,
        stride: usize,
        n1: usize,
        n2: usize,
        dim: usize,
        features: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let blocks = grid_h * grid_w;
        if features.len() != blocks * dim || valid.len() != blocks {
            return Err(Error::DimensionMismatch(format!(
                "expected {blocks} blocks of {dim} features",
            )));
        }
        Ok(Self {
            grid_h,
            grid_w,
            block_size,
            stride,
            n1,
            n2,
            dim,
            features,
            valid,
        })
    }

    pub fn grid_h(&self) -> usize {
        self.grid_h
    }

    pub fn grid_w(&self) -> usize {
        self.grid_w
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature(&self, block: usize) -> &[f64] {
        &self.features[block * self.dim..(block + 1) * self.dim]
    }

    pub fn is_valid(&self, block: usize) -> bool {
        self.valid[block]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Builds feature vectors (packed coefficients, optionally followed by
/// `ln(sigma2_hat)`) from per-block fits.
pub fn features_from_fits(
    fits: &[BlockFit],
    config: &SegmentConfig,
    n1: usize,
    n2: usize,
) -> Result<BlockFeatures> {
    let (grid_h, grid_w) = config.validate(n1, n2)?;
    if fits.len() != grid_h * grid_w {
        return Err(Error::DimensionMismatch(format!(
            "{} fits for a {grid_h}x{grid_w} grid",
            fits.len()
        )));
    }
    let dim = config.feature_dim();
    let mut features = vec![0.0; fits.len() * dim];
    let mut valid = vec![false; fits.len()];
    for (idx, bf) in fits.iter().enumerate() {
        if let Some(fit) = &bf.fit {
            valid[idx] = true;
            let dst = &mut features[idx * dim..(idx + 1) * dim];
            dst[..fit.theta.len()].copy_from_slice(&fit.theta);
            if config.include_sigma {
                dst[dim - 1] = fit.sigma2_hat.ln();
            }
        }
    }
    BlockFeatures::new(
        grid_h,
        grid_w,
        config.block_size,
        config.stride,
        n1,
        n2,
        dim,
        features,
        valid,
    )
}

/// Fits all blocks and extracts their feature vectors in one pass.
pub fn extract_features(field: &Field, config: &SegmentConfig) -> Result<BlockFeatures> {
    let fits = fit_blocks(field, config)?;
    features_from_fits(&fits, config, field.height(), field.width())
}

/// Result of clustering the block features into `k` classes.
///
/// Valid blocks carry labels in `0..k`; invalid blocks carry the reserved
/// label `k`. The pixel map replicates each pixel's nearest block label.
#[derive(Debug, Clone)]
pub struct SegmentationMap {
    pub k: usize,
    pub grid_h: usize,
    pub grid_w: usize,
    pub block_size: usize,
    pub n1: usize,
    pub n2: usize,
    pub block_labels: Vec<usize>,
    pub pixel_labels: Vec<usize>,
    /// Cluster centres in original (unstandardized) feature units.
    pub centroids: Vec<Vec<f64>>,
    /// Final within-cluster sum of squares over standardized features.
    pub inertia: f64,
    pub iterations: usize,
    /// Inertia after each assignment step; non-increasing by construction.
    pub inertia_trace: Vec<f64>,
}

/// Lloyd's algorithm over standardized features with k-means++ seeding.
///
/// Rules: features are standardized per dimension over the valid blocks;
/// assignment ties break toward the lowest cluster index; an emptied
/// cluster is re-seeded at the point farthest from its previous centroid;
/// iteration stops when the relative inertia drop falls below `1e-6` or
/// after 100 rounds. Deterministic for a fixed seed.
pub fn kmeans(features: &BlockFeatures, k: usize, seed: u64) -> Result<SegmentationMap> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    let valid_idx: Vec<usize> = (0..features.valid.len())
        .filter(|&i| features.valid[i])
        .collect();
    let n = valid_idx.len();
    if n < k {
        return Err(Error::TooFewValidBlocks {
            found: n,
            needed: k,
        });
    }
    let dim = features.dim;

    // Standardize each dimension over the valid blocks.
    let mut mean = vec![0.0; dim];
    let mut sd = vec![0.0; dim];
    for &i in &valid_idx {
        for (d, v) in features.feature(i).iter().enumerate() {
            mean[d] += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    for &i in &valid_idx {
        for (d, v) in features.feature(i).iter().enumerate() {
            sd[d] += (v - mean[d]) * (v - mean[d]);
        }
    }
    for s in sd.iter_mut() {
        *s = (*s / n as f64).sqrt();
        if *s < 1e-12 {
            *s = 1.0;
        }
    }
    let points: Vec<Vec<f64>> = valid_idx
        .iter()
        .map(|&i| {
            features
                .feature(i)
                .iter()
                .enumerate()
                .map(|(d, v)| (v - mean[d]) / sd[d])
                .collect()
        })
        .collect();

    let dist2 =
        |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum() };

    // k-means++ seeding.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..n)].clone());
    let mut min_d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = min_d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in min_d2.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (i, p) in points.iter().enumerate() {
            let d = dist2(p, &c);
            if d < min_d2[i] {
                min_d2[i] = d;
            }
        }
        centroids.push(c);
    }

    let mut labels = vec![0usize; n];
    let mut inertia_trace = Vec::new();
    let mut prev_inertia = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..KMEANS_MAX_ITERATIONS {
        // Assignment; scanning clusters in ascending order with a strict
        // comparison keeps ties on the lowest index.
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let mut best = f64::INFINITY;
            let mut best_c = 0;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = dist2(p, centroid);
                if d < best {
                    best = d;
                    best_c = c;
                }
            }
            labels[i] = best_c;
            inertia += best;
        }
        iterations += 1;
        assert!(
            inertia <= prev_inertia * (1.0 + 1e-12) + 1e-12,
            "k-means inertia increased: {prev_inertia} -> {inertia}"
        );
        inertia_trace.push(inertia);
        // <= so a zero-inertia (or unchanged) solution terminates.
        if prev_inertia.is_finite()
            && prev_inertia - inertia <= KMEANS_RELATIVE_TOLERANCE * prev_inertia
        {
            prev_inertia = inertia;
            break;
        }
        prev_inertia = inertia;

        // Update step.
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (d, v) in p.iter().enumerate() {
                sums[l][d] += v;
            }
        }
        let mut reseeded: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                for d in 0..dim {
                    centroids[c][d] = sums[c][d] / counts[c] as f64;
                }
            } else {
                // Re-seed an emptied cluster at the point farthest from its
                // previous centroid, skipping points already used this round.
                let mut far = None;
                let mut far_d = -1.0;
                for (i, p) in points.iter().enumerate() {
                    if reseeded.contains(&i) {
                        continue;
                    }
                    let d = dist2(p, &centroids[c]);
                    if d > far_d {
                        far_d = d;
                        far = Some(i);
                    }
                }
                if let Some(i) = far {
                    centroids[c] = points[i].clone();
                    reseeded.push(i);
                }
            }
        }
    }

    // Labels over the whole grid; invalid blocks get the reserved label k.
    let mut block_labels = vec![k; features.valid.len()];
    for (pos, &i) in valid_idx.iter().enumerate() {
        block_labels[i] = labels[pos];
    }

    // De-standardize the centroids back into feature units.
    let centroids: Vec<Vec<f64>> = centroids
        .into_iter()
        .map(|c| {
            c.into_iter()
                .enumerate()
                .map(|(d, v)| mean[d] + sd[d] * v)
                .collect()
        })
        .collect();

    let pixel_labels = replicate_pixel_labels(
        &block_labels,
        features.grid_h,
        features.grid_w,
        features.block_size,
        features.stride,
        features.n1,
        features.n2,
    );

    Ok(SegmentationMap {
        k,
        grid_h: features.grid_h,
        grid_w: features.grid_w,
        block_size: features.block_size,
        n1: features.n1,
        n2: features.n2,
        block_labels,
        pixel_labels,
        centroids,
        inertia: prev_inertia,
        iterations,
        inertia_trace,
    })
}

/// Every pixel inherits the label of the block whose centre is nearest.
fn replicate_pixel_labels(
    block_labels: &[usize],
    grid_h: usize,
    grid_w: usize,
    block_size: usize,
    stride: usize,
    n1: usize,
    n2: usize,
) -> Vec<usize> {
    let half = (block_size as f64 - 1.0) / 2.0;
    let nearest = |p: usize, count: usize| -> usize {
        let r = ((p as f64 - half) / stride as f64).round();
        r.clamp(0.0, (count - 1) as f64) as usize
    };
    let mut labels = vec![0usize; n1 * n2];
    for y in 0..n1 {
        let r = nearest(y, grid_h);
        for x in 0..n2 {
            let c = nearest(x, grid_w);
            labels[y * n2 + x] = block_labels[r * grid_w + c];
        }
    }
    labels
}

/// Best label agreement over all permutations of the class indices.
#[derive(Debug, Clone)]
pub struct LabelMatch {
    /// Fraction of valid blocks matched under the best permutation.
    pub accuracy: f64,
    /// `permutation[p]` is the truth label that predicted class `p` maps to.
    pub permutation: Vec<usize>,
    /// `confusion[t][p]` counts valid blocks with truth `t` and permuted
    /// prediction `p`.
    pub confusion: Vec<Vec<usize>>,
}

/// Permutation-matched accuracy between two label grids. Blocks labeled `k`
/// (the reserved invalid label) in either grid are excluded.
pub fn label_accuracy(pred: &[usize], truth: &[usize], k: usize) -> Result<LabelMatch> {
    if pred.len() != truth.len() {
        return Err(Error::LabelShapeMismatch(pred.len(), truth.len()));
    }
    // The search is exhaustive over k! permutations.
    if k > 8 {
        return Err(Error::InvalidConfig(format!(
            "permutation matching supports at most 8 classes, got {k}"
        )));
    }
    let pairs: Vec<(usize, usize)> = pred
        .iter()
        .zip(truth)
        .filter(|(&p, &t)| p < k && t < k)
        .map(|(&p, &t)| (p, t))
        .collect();
    let mut best_perm: Vec<usize> = (0..k).collect();
    let mut best_hits = 0usize;
    let mut scratch: Vec<usize> = (0..k).collect();
    permutations(&mut scratch, 0, &mut |perm| {
        let hits = pairs.iter().filter(|&&(p, t)| perm[p] == t).count();
        if hits > best_hits {
            best_hits = hits;
            best_perm = perm.to_vec();
        }
    });
    let accuracy = if pairs.is_empty() {
        0.0
    } else {
        best_hits as f64 / pairs.len() as f64
    };
    let mut confusion = vec![vec![0usize; k]; k];
    for &(p, t) in &pairs {
        confusion[t][best_perm[p]] += 1;
    }
    Ok(LabelMatch {
        accuracy,
        permutation: best_perm,
        confusion,
    })
}

fn permutations(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permutations(items, start + 1, visit);
        items.swap(start, i);
    }
}

impl SegmentationMap {
    /// Permutation-matched accuracy of the block labels against a truth grid.
    pub fn accuracy_against(&self, truth: &[usize]) -> Result<LabelMatch> {
        label_accuracy(&self.block_labels, truth, self.k)
    }
}
