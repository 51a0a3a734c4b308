//! Grayscale frame container shared by the whole pipeline.

use crate::math;
use alloc::vec::Vec;

/// A single grayscale frame, row-major.
///
/// Frames loaded from disk carry intensities rescaled to `[0, 1]`; the
/// PCA network reuses this container for filtered maps, whose values are
/// unconstrained reals.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    /// Panics if the buffer length is not width·height.
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Self {
        assert_eq!(pixels.len(), width * height, "pixel buffer length mismatch");
        GrayImage { width, height, pixels }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        GrayImage { width, height, pixels: alloc::vec![0.0; width * height] }
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.pixels[row * self.width + col] = v;
    }
}

/// Per-frame mean/variance normalization (optional preprocessing).
///
/// Output has zero mean and unit variance; a constant frame maps to all
/// zeros. Values are no longer confined to `[0, 1]`.
pub fn normalize_mean_variance(img: &GrayImage) -> GrayImage {
    let n = img.pixels.len() as f64;
    let mean = img.pixels.iter().sum::<f64>() / n;
    let var = img.pixels.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / n;
    // Guard against a numerically-constant frame (roundoff leaves ~1e-32).
    let scale = if var > 1e-20 { 1.0 / math::sqrt(var) } else { 0.0 };
    GrayImage {
        width: img.width,
        height: img.height,
        pixels: img.pixels.iter().map(|p| (p - mean) * scale).collect(),
    }
}
