//! Diagonal-covariance Gaussian mixtures with log-domain EM.

use crate::mat::Mat;
use crate::math::{self, logsumexp, LN_2PI};
use crate::rng::rng_from_seed;
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

/// Default variance floor as a fraction of the global per-dimension
/// variance of the training data.
pub const DEFAULT_VARIANCE_FLOOR_RATIO: f64 = 1e-4;

/// Absolute fallback floor for dimensions whose global variance is
/// exactly zero (tandem vectors pin unseen classes to a constant).
const ABSOLUTE_VARIANCE_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Mat,
    variances: Mat,
    /// log w_k, cached.
    log_weights: Vec<f64>,
    /// −½ Σ_d log(2π σ²_kd), cached.
    log_norm: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Mat, variances: Mat) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidArgument("mixture needs ≥ 1 component".into()));
        }
        if means.rows() != k || variances.rows() != k || means.cols() != variances.cols() {
            return Err(Error::DimensionMismatch(format!(
                "weights {k}, means {}×{}, variances {}×{}",
                means.rows(),
                means.cols(),
                variances.rows(),
                variances.cols()
            )));
        }
        let total: f64 = weights.iter().sum();
        if math::abs(total - 1.0) > 1e-8 || weights.iter().any(|&w| w <= 0.0) {
            return Err(Error::ValueOutOfRange(format!(
                "weights must be positive and sum to 1, got sum {total}"
            )));
        }
        if variances.data().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::ValueOutOfRange("non-positive variance".into()));
        }
        Ok(Self::new_unchecked(weights, means, variances))
    }

    fn new_unchecked(weights: Vec<f64>, means: Mat, variances: Mat) -> Self {
        let log_weights = weights.iter().map(|&w| math::ln(w)).collect();
        let log_norm = variances
            .iter_rows()
            .map(|row| -0.5 * row.iter().map(|&v| LN_2PI + math::ln(v)).sum::<f64>())
            .collect();
        GaussianMixture { weights, means, variances, log_weights, log_norm }
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.cols()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &Mat {
        &self.means
    }

    pub fn variances(&self) -> &Mat {
        &self.variances
    }

    /// log Σ_k w_k N(x; μ_k, diag σ²_k).
    pub fn log_pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "point has dim {}, mixture has {}",
                x.len(),
                self.dim()
            )));
        }
        let mut terms = vec![0.0; self.n_components()];
        self.component_log_joint(x, &mut terms);
        Ok(logsumexp(&terms))
    }

    /// Per-component log(w_k) + log N_k(x) into `out`.
    fn component_log_joint(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..self.n_components() {
            let mu = self.means.row(k);
            let var = self.variances.row(k);
            let mut quad = 0.0;
            for d in 0..x.len() {
                let diff = x[d] - mu[d];
                quad += diff * diff / var[d];
            }
            out[k] = self.log_weights[k] + self.log_norm[k] - 0.5 * quad;
        }
    }
}

/// Global per-dimension ML variance of the rows of `data`.
fn global_variance(data: &Mat) -> (Vec<f64>, Vec<f64>) {
    let n = data.rows() as f64;
    let m = data.cols();
    let mut mean = vec![0.0; m];
    for row in data.iter_rows() {
        for (s, &v) in mean.iter_mut().zip(row) {
            *s += v;
        }
    }
    for s in mean.iter_mut() {
        *s /= n;
    }
    let mut var = vec![0.0; m];
    for row in data.iter_rows() {
        for d in 0..m {
            let diff = row[d] - mean[d];
            var[d] += diff * diff;
        }
    }
    for v in var.iter_mut() {
        *v /= n;
    }
    (mean, var)
}

/// Variance floor per dimension: `ratio` of the global variance, with an
/// absolute fallback for exactly constant dimensions.
pub fn variance_floor(data: &Mat, ratio: f64) -> Vec<f64> {
    let (_, gv) = global_variance(data);
    gv.iter()
        .map(|&v| if v > 0.0 { ratio * v } else { ABSOLUTE_VARIANCE_FLOOR })
        .collect()
}

fn floored(mut var: Mat, floor: &[f64]) -> Mat {
    for r in 0..var.rows() {
        let row = var.row_mut(r);
        for (v, &f) in row.iter_mut().zip(floor) {
            if *v < f {
                *v = f;
            }
        }
    }
    var
}

/// Seeded k-means++ center choice: first uniform, then proportional to
/// squared distance from the nearest chosen center.
fn kmeanspp_centers(data: &Mat, k: usize, seed: u64) -> Vec<usize> {
    let n = data.rows();
    let mut rng = rng_from_seed(seed);
    let mut centers = Vec::with_capacity(k);
    centers.push(rng.random_range(0..n));
    let mut d2 = vec![0.0f64; n];
    for i in 0..n {
        d2[i] = sq_dist(data.row(i), data.row(centers[0]));
    }
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All points coincide with a center; spread deterministically.
            centers.len() % n
        };
        centers.push(pick);
        for i in 0..n {
            let d = sq_dist(data.row(i), data.row(pick));
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centers
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// One EM sweep: E-step responsibilities under `gmm`, M-step with
/// two-pass variance estimation and flooring, empty components reseeded
/// from the lowest-likelihood point. Returns the updated mixture and
/// the data log-likelihood under the *input* parameters.
pub fn em_update(gmm: &GaussianMixture, data: &Mat, floor: &[f64]) -> Result<(GaussianMixture, f64)> {
    let n = data.rows();
    let k = gmm.n_components();
    let m = gmm.dim();
    if data.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "data dim {} vs mixture dim {m}",
            data.cols()
        )));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no data points".into()));
    }

    // E-step.
    let mut resp = Mat::zeros(n, k);
    let mut ll = 0.0;
    let mut worst = (f64::INFINITY, 0usize);
    for i in 0..n {
        let row = resp.row_mut(i);
        gmm.component_log_joint(data.row(i), row);
        let norm = logsumexp(row);
        ll += norm;
        if norm < worst.0 {
            worst = (norm, i);
        }
        for v in row.iter_mut() {
            *v = math::exp(*v - norm);
        }
    }

    // M-step: weights and means.
    let mut nk = vec![0.0; k];
    let mut means = Mat::zeros(k, m);
    for i in 0..n {
        let r = resp.row(i);
        let x = data.row(i);
        for c in 0..k {
            let rc = r[c];
            if rc == 0.0 {
                continue;
            }
            nk[c] += rc;
            let mrow = means.row_mut(c);
            for d in 0..m {
                mrow[d] += rc * x[d];
            }
        }
    }
    let mut empty = Vec::new();
    for c in 0..k {
        if nk[c] > 0.0 {
            let mrow = means.row_mut(c);
            for v in mrow.iter_mut() {
                *v /= nk[c];
            }
        } else {
            empty.push(c);
        }
    }

    // Two-pass variances around the new means (exact single-Gaussian ML
    // when K=1).
    let mut vars = Mat::zeros(k, m);
    for i in 0..n {
        let r = resp.row(i);
        let x = data.row(i);
        for c in 0..k {
            let rc = r[c];
            if rc == 0.0 {
                continue;
            }
            let mrow = means.row(c);
            let vrow = vars.row_mut(c);
            for d in 0..m {
                let diff = x[d] - mrow[d];
                vrow[d] += rc * diff * diff;
            }
        }
    }
    for c in 0..k {
        if !empty.contains(&c) {
            let vrow = vars.row_mut(c);
            for v in vrow.iter_mut() {
                *v /= nk[c];
            }
        }
    }

    // Dead components restart from the point the model explains worst.
    let (_, gv) = global_variance(data);
    for &c in &empty {
        means.row_mut(c).copy_from_slice(data.row(worst.1));
        vars.row_mut(c).copy_from_slice(&gv);
        nk[c] = 1.0;
    }
    let total: f64 = nk.iter().sum();
    let weights: Vec<f64> = nk.iter().map(|&v| v / total).collect();
    let vars = floored(vars, floor);
    Ok((GaussianMixture::new_unchecked(weights, means, vars), ll))
}

/// Fits a K-component diagonal GMM by seeded k-means++ initialization
/// and `iters` EM sweeps. Returns the mixture and the log-likelihood
/// trace (entry i is the data log-likelihood before sweep i's update).
pub fn gmm_em(
    data: &Mat,
    k: usize,
    iters: usize,
    seed: u64,
    floor_ratio: f64,
) -> Result<(GaussianMixture, Vec<f64>)> {
    let n = data.rows();
    if n < k || k == 0 {
        return Err(Error::InvalidArgument(format!(
            "cannot fit {k} components to {n} points"
        )));
    }
    let floor = variance_floor(data, floor_ratio);
    let (_, gv) = global_variance(data);
    let gv_floored: Vec<f64> = gv
        .iter()
        .zip(&floor)
        .map(|(&v, &f)| if v > f { v } else { f })
        .collect();

    let centers = kmeanspp_centers(data, k, seed);
    let mut means = Mat::zeros(k, data.cols());
    let mut vars = Mat::zeros(k, data.cols());
    for (c, &idx) in centers.iter().enumerate() {
        means.row_mut(c).copy_from_slice(data.row(idx));
        vars.row_mut(c).copy_from_slice(&gv_floored);
    }
    let weights = vec![1.0 / k as f64; k];
    let mut gmm = GaussianMixture::new_unchecked(weights, means, vars);

    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let (next, ll) = em_update(&gmm, data, &floor)?;
        trace.push(ll);
        gmm = next;
    }
    Ok((gmm, trace))
}

/// Splits components toward `target`: below half the target every
/// component splits into μ ± 0.2σ with halved weight; on the final
/// increment only the `target − K` heaviest split (ties toward the
/// lower index). Children keep the parent variances.
pub fn split_mixtures(gmm: &GaussianMixture, target: usize) -> GaussianMixture {
    let k = gmm.n_components();
    if target <= k {
        return gmm.clone();
    }
    let n_split = (target - k).min(k);
    // Indices of the n_split heaviest components.
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        gmm.weights[b]
            .partial_cmp(&gmm.weights[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let chosen = &order[..n_split];

    let m = gmm.dim();
    let out_k = k + n_split;
    let mut weights = Vec::with_capacity(out_k);
    let mut means = Mat::zeros(out_k, m);
    let mut vars = Mat::zeros(out_k, m);
    let mut at = 0;
    for c in 0..k {
        if chosen.contains(&c) {
            let mu = gmm.means.row(c);
            let var = gmm.variances.row(c);
            for sign in [-1.0, 1.0] {
                let mrow = means.row_mut(at);
                for d in 0..m {
                    mrow[d] = mu[d] + sign * 0.2 * math::sqrt(var[d]);
                }
                vars.row_mut(at).copy_from_slice(var);
                weights.push(gmm.weights[c] / 2.0);
                at += 1;
            }
        } else {
            means.row_mut(at).copy_from_slice(gmm.means.row(c));
            vars.row_mut(at).copy_from_slice(gmm.variances.row(c));
            weights.push(gmm.weights[c]);
            at += 1;
        }
    }
    GaussianMixture::new_unchecked(weights, means, vars)
}

/// Mixture-count schedule: doubling from 1, capped at `max`.
pub fn mixture_schedule(max: usize) -> Vec<usize> {
    let mut out = vec![1];
    let mut k = 1;
    while k < max {
        k = (k * 2).min(max);
        out.push(k);
    }
    out
}
