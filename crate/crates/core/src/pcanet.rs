//! Two-stage PCA convolutional network.
//!
//! Filters are the leading eigenvectors of the scatter matrix of
//! mean-removed square image patches. Each frame passes through two
//! convolution stages; the second-stage maps are binarized with a
//! Heaviside step, stacked into integer hash images by powers of two,
//! max-pooled, and summarized as concatenated block histograms. With the
//! default configuration (7×7 patches, 8 filters per stage, 4×4 blocks,
//! 256 bins) a 60×90 frame maps to a 16·256·8 = 32,768-dimensional count
//! vector.

use crate::eigen::symmetric_eigen;
use crate::image::GrayImage;
use crate::mat::Mat;
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Network hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PcanetConfig {
    /// Side length of square patches (odd).
    pub patch_side: usize,
    /// Filters per stage; 8 gives the 8-bit hash images.
    pub filters_per_stage: usize,
    /// Max-pool window applied to hash images before histogramming.
    pub pool_window: usize,
    /// Max-pool stride.
    pub pool_stride: usize,
    /// Histogram block grid is `block_grid` × `block_grid`.
    pub block_grid: usize,
    /// Histogram bins; must be at least 2^filters_per_stage.
    pub bins: usize,
}

impl Default for PcanetConfig {
    fn default() -> Self {
        PcanetConfig {
            patch_side: 7,
            filters_per_stage: 8,
            pool_window: 2,
            pool_stride: 2,
            block_grid: 4,
            bins: 256,
        }
    }
}

impl PcanetConfig {
    /// Length of the final per-frame feature vector.
    pub fn feature_len(&self) -> usize {
        self.block_grid * self.block_grid * self.bins * self.filters_per_stage
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_side % 2 == 0 || self.patch_side == 0 {
            return Err(Error::InvalidArgument(format!(
                "patch_side must be odd and positive, got {}",
                self.patch_side
            )));
        }
        if self.filters_per_stage == 0 || self.filters_per_stage > 16 {
            return Err(Error::InvalidArgument(format!(
                "filters_per_stage must be in 1..=16, got {}",
                self.filters_per_stage
            )));
        }
        if self.bins < (1usize << self.filters_per_stage) {
            return Err(Error::InvalidArgument(format!(
                "bins ({}) must cover all 2^{} hash values",
                self.bins, self.filters_per_stage
            )));
        }
        if self.pool_window == 0 || self.pool_stride == 0 || self.block_grid == 0 {
            return Err(Error::InvalidArgument(
                "pool_window, pool_stride, and block_grid must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A learned bank of orthonormal PCA eigenfilters, in descending
/// eigenvalue order.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    /// 1 or 2.
    pub stage: u8,
    pub patch_side: usize,
    /// Each filter has length patch_side², row-major.
    pub filters: Vec<Vec<f64>>,
    /// Scatter eigenvalues matching `filters`.
    pub eigenvalues: Vec<f64>,
}

/// Integer image of stacked binary maps; values are below 2^L.
#[derive(Debug, Clone, PartialEq)]
pub struct HashImage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u16>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchMode {
    /// Interior patches only: (h−k+1)·(w−k+1) of them.
    Valid,
    /// Zero-pad by (k−1)/2 on all sides: h·w patches.
    Same,
}

/// Extracts vectorized square patches with per-patch mean removal.
pub fn extract_patches(image: &GrayImage, k: usize, mode: PatchMode) -> Result<Mat> {
    if k % 2 == 0 || k == 0 {
        return Err(Error::InvalidArgument(format!("patch side must be odd, got {k}")));
    }
    let (w, h) = (image.width, image.height);
    if mode == PatchMode::Valid && (k > w || k > h) {
        return Err(Error::InvalidArgument(format!(
            "patch side {k} exceeds image size {h}x{w}"
        )));
    }
    let pad = (k - 1) / 2;
    let (rows, cols) = match mode {
        PatchMode::Valid => (h - k + 1, w - k + 1),
        PatchMode::Same => (h, w),
    };
    let mut out = Mat::zeros(rows * cols, k * k);
    let mut idx = 0;
    for r in 0..rows {
        for c in 0..cols {
            let patch = out.row_mut(idx);
            idx += 1;
            let mut at = 0;
            for dr in 0..k {
                for dc in 0..k {
                    let v = match mode {
                        PatchMode::Valid => image.get(r + dr, c + dc),
                        PatchMode::Same => {
                            let ir = r + dr;
                            let ic = c + dc;
                            if ir < pad || ic < pad || ir - pad >= h || ic - pad >= w {
                                0.0
                            } else {
                                image.get(ir - pad, ic - pad)
                            }
                        }
                    };
                    patch[at] = v;
                    at += 1;
                }
            }
            let mean = patch.iter().sum::<f64>() / (k * k) as f64;
            for v in patch.iter_mut() {
                *v -= mean;
            }
        }
    }
    Ok(out)
}

/// Running sum of patch outer products.
///
/// Accumulation is associative by construction: partitions may be filled
/// independently and merged in a fixed order, giving run-to-run identical
/// scatters regardless of how the work was split.
#[derive(Debug, Clone)]
pub struct PatchScatter {
    dim: usize,
    sums: Mat,
    count: u64,
}

impl PatchScatter {
    pub fn new(patch_len: usize) -> Self {
        PatchScatter { dim: patch_len, sums: Mat::zeros(patch_len, patch_len), count: 0 }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Adds every row of `patches` (upper triangle only; mirrored on demand).
    pub fn add_patches(&mut self, patches: &Mat) -> Result<()> {
        if patches.cols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "patch length {} does not match scatter dim {}",
                patches.cols(),
                self.dim
            )));
        }
        let d = self.dim;
        for p in patches.iter_rows() {
            for i in 0..d {
                let pi = p[i];
                if pi == 0.0 {
                    continue;
                }
                let row = self.sums.row_mut(i);
                for j in i..d {
                    row[j] += pi * p[j];
                }
            }
        }
        self.count += patches.rows() as u64;
        Ok(())
    }

    pub fn merge(&mut self, other: &PatchScatter) {
        assert_eq!(self.dim, other.dim, "scatter dimension mismatch");
        for (a, b) in self.sums.data_mut().iter_mut().zip(other.sums.data()) {
            *a += *b;
        }
        self.count += other.count;
    }

    fn symmetric(&self) -> Mat {
        let d = self.dim;
        let mut m = self.sums.clone();
        for i in 0..d {
            for j in 0..i {
                let v = m.get(j, i);
                m.set(i, j, v);
            }
        }
        m
    }
}

/// Learns the top-`l` eigenfilters from an accumulated patch scatter.
///
/// Sign convention: each filter's largest-magnitude entry is made
/// positive (first such entry on magnitude ties), so binarization does
/// not depend on eigensolver arbitrariness.
pub fn learn_filters_from_scatter(
    scatter: &PatchScatter,
    l: usize,
    stage: u8,
) -> Result<FilterBank> {
    let k2 = scatter.dim;
    if l > k2 {
        return Err(Error::InvalidArgument(format!(
            "cannot learn {l} filters from patches of length {k2}"
        )));
    }
    if (scatter.count as usize) < l {
        return Err(Error::InvalidArgument(format!(
            "need at least {l} patches, got {}",
            scatter.count
        )));
    }
    let (values, vectors) = symmetric_eigen(&scatter.symmetric());
    let rank = values.iter().filter(|&&v| v > values[0].max(0.0) * 1e-12 && v > 0.0).count();
    if rank < l {
        return Err(Error::RankDeficient { requested: l, attained: rank });
    }

    let mut filters = Vec::with_capacity(l);
    for j in 0..l {
        let mut f: Vec<f64> = (0..k2).map(|i| vectors.get(i, j)).collect();
        let mut best = 0usize;
        for (i, v) in f.iter().enumerate() {
            if v.abs() > f[best].abs() {
                best = i;
            }
        }
        if f[best] < 0.0 {
            for v in f.iter_mut() {
                *v = -*v;
            }
        }
        filters.push(f);
    }
    let patch_side = float_isqrt(k2);
    Ok(FilterBank { stage, patch_side, filters, eigenvalues: values[..l].to_vec() })
}

fn float_isqrt(k2: usize) -> usize {
    let mut k = 1;
    while k * k < k2 {
        k += 1;
    }
    k
}

/// Learns filters directly from a patch matrix (rows are patches).
pub fn learn_filters(patches: &Mat, l: usize, stage: u8) -> Result<FilterBank> {
    let mut scatter = PatchScatter::new(patches.cols());
    scatter.add_patches(patches)?;
    learn_filters_from_scatter(&scatter, l, stage)
}

/// Same-size correlation (no kernel flip) with zero padding of (k−1)/2.
pub fn conv_same(image: &GrayImage, kernel: &[f64], k: usize) -> GrayImage {
    debug_assert_eq!(kernel.len(), k * k);
    let (w, h) = (image.width, image.height);
    let pad = (k - 1) / 2;
    let mut out = vec![0.0; w * h];
    for r in 0..h {
        let orow_start = r * w;
        for dr in 0..k {
            let ir = r + dr;
            if ir < pad || ir - pad >= h {
                continue;
            }
            let irow = &image.pixels[(ir - pad) * w..(ir - pad + 1) * w];
            let krow = &kernel[dr * k..(dr + 1) * k];
            for (dc, &kv) in krow.iter().enumerate() {
                if kv == 0.0 {
                    continue;
                }
                let c0 = pad.saturating_sub(dc);
                let c1 = (w + pad).saturating_sub(dc).min(w);
                let src = &irow[c0 + dc - pad..c1 + dc - pad];
                let dst = &mut out[orow_start + c0..orow_start + c1];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += kv * *s;
                }
            }
        }
    }
    GrayImage::new(w, h, out)
}

/// Convolves one image with every filter of a bank.
pub fn stage_forward(image: &GrayImage, bank: &FilterBank) -> Result<Vec<GrayImage>> {
    let k = bank.patch_side;
    if image.width < k || image.height < k {
        return Err(Error::DimensionMismatch(format!(
            "image {}x{} smaller than {}x{} kernel",
            image.height, image.width, k, k
        )));
    }
    Ok(bank.filters.iter().map(|f| conv_same(image, f, k)).collect())
}

/// Stacks `maps.len()` Heaviside-binarized maps into one integer image:
/// map `l` (1-based) contributes weight 2^(l−1) wherever it is strictly
/// positive. H(0) = 0.
pub fn stack_binary(maps: &[GrayImage]) -> Result<HashImage> {
    let first = maps.first().ok_or_else(|| {
        Error::InvalidArgument("cannot stack an empty map list".into())
    })?;
    if maps.len() > 16 {
        return Err(Error::InvalidArgument(format!("too many maps to stack: {}", maps.len())));
    }
    let (w, h) = (first.width, first.height);
    let mut values = vec![0u16; w * h];
    for (l, map) in maps.iter().enumerate() {
        if map.width != w || map.height != h {
            return Err(Error::DimensionMismatch(format!(
                "map {} is {}x{}, expected {}x{}",
                l, map.height, map.width, h, w
            )));
        }
        let weight = 1u16 << l;
        for (v, &p) in values.iter_mut().zip(&map.pixels) {
            if p > 0.0 {
                *v |= weight;
            }
        }
    }
    Ok(HashImage { width: w, height: h, values })
}

/// The 8-bit stacking step: exactly eight maps.
pub fn binarize_and_stack(maps: &[GrayImage]) -> Result<HashImage> {
    if maps.len() != 8 {
        return Err(Error::DimensionMismatch(format!(
            "binarize_and_stack needs exactly 8 maps, got {}",
            maps.len()
        )));
    }
    stack_binary(maps)
}

/// Max-pooling with ragged right/bottom windows (no pixel is dropped).
pub fn max_pool(img: &HashImage, window: usize, stride: usize) -> HashImage {
    assert!(window > 0 && stride > 0, "window and stride must be positive");
    let out_h = img.height.div_ceil(stride);
    let out_w = img.width.div_ceil(stride);
    let mut values = Vec::with_capacity(out_h * out_w);
    for br in 0..out_h {
        let r0 = br * stride;
        let r1 = (r0 + window).min(img.height);
        for bc in 0..out_w {
            let c0 = bc * stride;
            let c1 = (c0 + window).min(img.width);
            let mut m = 0u16;
            for r in r0..r1 {
                for c in c0..c1 {
                    m = m.max(img.values[r * img.width + c]);
                }
            }
            values.push(m);
        }
    }
    HashImage { width: out_w, height: out_h, values }
}

/// Boundaries of a balanced 1-D partition into `blocks` parts: the last
/// `n mod blocks` parts take one extra element, so nothing is discarded.
fn partition(n: usize, blocks: usize) -> Vec<usize> {
    let base = n / blocks;
    let rem = n % blocks;
    let mut bounds = Vec::with_capacity(blocks + 1);
    bounds.push(0);
    let mut at = 0;
    for i in 0..blocks {
        at += base + usize::from(i >= blocks - rem);
        bounds.push(at);
    }
    bounds
}

/// Raw (unnormalized) per-block histograms, concatenated block-row-major.
pub fn block_histograms(img: &HashImage, grid: usize, bins: usize) -> Result<Vec<f64>> {
    let row_bounds = partition(img.height, grid);
    let col_bounds = partition(img.width, grid);
    let mut out = vec![0.0; grid * grid * bins];
    for br in 0..grid {
        for bc in 0..grid {
            let hist = &mut out[(br * grid + bc) * bins..(br * grid + bc + 1) * bins];
            for r in row_bounds[br]..row_bounds[br + 1] {
                for c in col_bounds[bc]..col_bounds[bc + 1] {
                    let v = img.values[r * img.width + c] as usize;
                    if v >= bins {
                        return Err(Error::ValueOutOfRange(format!(
                            "hash value {v} at ({r},{c}) exceeds {bins} bins"
                        )));
                    }
                    hist[v] += 1.0;
                }
            }
        }
    }
    Ok(out)
}

/// Full per-frame feature: stage 1, stage 2 grouped by stage-1 parent,
/// binary hashing, max-pooling, block histograms, concatenated in
/// stage-1 filter order.
pub fn extract_feature(
    frame: &GrayImage,
    bank1: &FilterBank,
    bank2: &FilterBank,
    cfg: &PcanetConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let l = cfg.filters_per_stage;
    if bank1.filters.len() != l || bank2.filters.len() != l {
        return Err(Error::DimensionMismatch(format!(
            "banks have {} and {} filters, config wants {l}",
            bank1.filters.len(),
            bank2.filters.len()
        )));
    }
    let stage1 = stage_forward(frame, bank1)?;
    let mut feature = Vec::with_capacity(cfg.feature_len());
    for parent in &stage1 {
        let group = stage_forward(parent, bank2)?;
        let hash = stack_binary(&group)?;
        let pooled = max_pool(&hash, cfg.pool_window, cfg.pool_stride);
        feature.extend(block_histograms(&pooled, cfg.block_grid, cfg.bins)?);
    }
    Ok(feature)
}
