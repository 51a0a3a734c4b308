//! Single-layer LSTM frame classifier, trained from scratch.
//!
//! Gates and cells both use the logistic sigmoid. Gradients come from
//! full backpropagation through time (optionally truncated), and the
//! optimizer is momentum SGD with weight decay on weights only.
//!
//! Input frames are accepted in a sparse index/value form because the
//! upstream histogram features are mostly zeros; dense matrices convert
//! via [`SparseSeq::from_dense`] and produce identical results.

use crate::mat::Mat;
use crate::math::{self, sigmoid};
use crate::rng::rng_from_seed;
use crate::{Error, Result};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::Rng;

/// One frame of input features, nonzero entries only.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFrame {
    pub idx: Vec<u32>,
    pub val: Vec<f64>,
}

/// A whole utterance in sparse form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSeq {
    pub dim: usize,
    pub frames: Vec<SparseFrame>,
}

impl SparseSeq {
    pub fn from_dense(features: &Mat) -> Self {
        let frames = features
            .iter_rows()
            .map(|row| {
                let mut idx = Vec::new();
                let mut val = Vec::new();
                for (j, &v) in row.iter().enumerate() {
                    if v != 0.0 {
                        idx.push(j as u32);
                        val.push(v);
                    }
                }
                SparseFrame { idx, val }
            })
            .collect();
        SparseSeq { dim: features.cols(), frames }
    }

    pub fn from_dense_scaled(features: &Mat, scale: f64) -> Self {
        let mut seq = Self::from_dense(features);
        for f in &mut seq.frames {
            for v in &mut f.val {
                *v *= scale;
            }
        }
        seq
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// All trainable tensors.
///
/// Gate weights are fused and stored input-major: row `j` of `w` holds
/// the `4H` weights `[input | forget | output | cell]` fed by input
/// component `j` (rows `0..D` are the frame features, rows `D..D+H` the
/// recurrent hidden state). `w_y` is hidden-major `H×C`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub n_classes: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub w_y: Vec<f64>,
    pub b_y: Vec<f64>,
}

/// Gradient (or velocity) buffers matching [`LstmParams`] layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmTensors {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub w_y: Vec<f64>,
    pub b_y: Vec<f64>,
}

impl LstmTensors {
    pub fn zeros_like(p: &LstmParams) -> Self {
        LstmTensors {
            w: vec![0.0; p.w.len()],
            b: vec![0.0; p.b.len()],
            w_y: vec![0.0; p.w_y.len()],
            b_y: vec![0.0; p.b_y.len()],
        }
    }

    pub fn norm(&self) -> f64 {
        let sq: f64 = self
            .w
            .iter()
            .chain(&self.b)
            .chain(&self.w_y)
            .chain(&self.b_y)
            .map(|v| v * v)
            .sum();
        math::sqrt(sq)
    }
}

impl LstmParams {
    /// Seeded initialization: weights uniform in (−r, r) with
    /// r = 1/√(D+H); biases zero except the forget gate at +1.
    pub fn init(input_dim: usize, hidden_dim: usize, n_classes: usize, seed: u64) -> Self {
        let d = input_dim;
        let h = hidden_dim;
        let c = n_classes;
        let r = 1.0 / math::sqrt((d + h) as f64);
        let mut rng = rng_from_seed(seed);
        let mut uniform = |n: usize| -> Vec<f64> {
            (0..n).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * r).collect()
        };
        let w = uniform((d + h) * 4 * h);
        let w_y = uniform(h * c);
        let mut b = vec![0.0; 4 * h];
        b[h..2 * h].fill(1.0); // forget gate
        let b_y = vec![0.0; c];
        LstmParams { input_dim: d, hidden_dim: h, n_classes: c, w, b, w_y, b_y }
    }
}

/// Activations recorded by [`forward`] for reuse in [`backward`].
#[derive(Debug, Clone)]
pub struct Cache {
    /// Post-sigmoid gate activations per frame, `T×4H` as `[i|f|o|g]`.
    gates: Mat,
    /// Cell states `c_t`, `T×H`.
    cell: Mat,
    /// Squashed cell `σ(c_t)`, `T×H`.
    cell_sq: Mat,
    /// Hidden states `h_t`, `T×H`.
    hidden: Mat,
    /// Softmax outputs, `T×C`.
    posteriors: Mat,
}

impl Cache {
    pub fn posteriors(&self) -> &Mat {
        &self.posteriors
    }
}

/// Runs the recurrence from zero initial state and returns per-frame
/// class posteriors (rows sum to 1) plus the activation cache.
pub fn forward(params: &LstmParams, seq: &SparseSeq) -> Result<(Mat, Cache)> {
    let (d, h, c) = (params.input_dim, params.hidden_dim, params.n_classes);
    if seq.dim != d {
        return Err(Error::DimensionMismatch(format!(
            "input dim {} does not match model dim {d}",
            seq.dim
        )));
    }
    let t_len = seq.len();
    if t_len == 0 {
        return Err(Error::InvalidArgument("empty sequence".into()));
    }
    let g4 = 4 * h;

    let mut gates = Mat::zeros(t_len, g4);
    let mut cell = Mat::zeros(t_len, h);
    let mut cell_sq = Mat::zeros(t_len, h);
    let mut hidden = Mat::zeros(t_len, h);
    let mut posteriors = Mat::zeros(t_len, c);

    let mut h_prev = vec![0.0; h];
    let mut c_prev = vec![0.0; h];
    let mut z = vec![0.0; g4];

    for t in 0..t_len {
        let frame = &seq.frames[t];
        z.copy_from_slice(&params.b);
        for (&j, &x) in frame.idx.iter().zip(&frame.val) {
            let j = j as usize;
            if j >= d {
                return Err(Error::DimensionMismatch(format!(
                    "feature index {j} out of range for dim {d}"
                )));
            }
            if !x.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite input at frame {t}")));
            }
            let row = &params.w[j * g4..(j + 1) * g4];
            for (acc, wv) in z.iter_mut().zip(row) {
                *acc += x * wv;
            }
        }
        for (hp, hv) in h_prev.iter().enumerate() {
            if *hv == 0.0 {
                continue;
            }
            let row = &params.w[(d + hp) * g4..(d + hp + 1) * g4];
            for (acc, wv) in z.iter_mut().zip(row) {
                *acc += hv * wv;
            }
        }

        {
            let grow = gates.row_mut(t);
            for (gv, zv) in grow.iter_mut().zip(&z) {
                *gv = sigmoid(*zv);
            }
        }
        let grow = gates.row(t);
        let (crow_v, srow_v, hrow_v): (Vec<f64>, Vec<f64>, Vec<f64>) = {
            let mut cv = vec![0.0; h];
            let mut sv = vec![0.0; h];
            let mut hv = vec![0.0; h];
            for k in 0..h {
                let i_g = grow[k];
                let f_g = grow[h + k];
                let o_g = grow[2 * h + k];
                let g_g = grow[3 * h + k];
                let cnew = f_g * c_prev[k] + i_g * g_g;
                let s = sigmoid(cnew);
                cv[k] = cnew;
                sv[k] = s;
                hv[k] = o_g * s;
            }
            (cv, sv, hv)
        };
        cell.row_mut(t).copy_from_slice(&crow_v);
        cell_sq.row_mut(t).copy_from_slice(&srow_v);
        hidden.row_mut(t).copy_from_slice(&hrow_v);
        c_prev.copy_from_slice(&crow_v);
        h_prev.copy_from_slice(&hrow_v);

        // Output layer with max-subtracted softmax.
        let mut logits = params.b_y.clone();
        for (k, hv) in h_prev.iter().enumerate() {
            let row = &params.w_y[k * c..(k + 1) * c];
            for (lv, wv) in logits.iter_mut().zip(row) {
                *lv += hv * wv;
            }
        }
        let maxl = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for lv in logits.iter_mut() {
            *lv = math::exp(*lv - maxl);
            sum += *lv;
        }
        let prow = posteriors.row_mut(t);
        for (pv, lv) in prow.iter_mut().zip(&logits) {
            *pv = lv / sum;
        }
    }

    let cache = Cache { gates, cell, cell_sq, hidden, posteriors: posteriors.clone() };
    Ok((posteriors, cache))
}

/// Dense convenience wrapper around [`forward`].
pub fn forward_dense(params: &LstmParams, features: &Mat) -> Result<(Mat, Cache)> {
    forward(params, &SparseSeq::from_dense(features))
}

/// Mean cross-entropy in nats per frame.
pub fn loss(posteriors: &Mat, labels: &[usize]) -> Result<f64> {
    if posteriors.rows() != labels.len() {
        return Err(Error::LengthMismatch(format!(
            "{} posterior rows vs {} labels",
            posteriors.rows(),
            labels.len()
        )));
    }
    let c = posteriors.cols();
    let mut total = 0.0;
    for (t, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::ValueOutOfRange(format!("label {y} at frame {t} exceeds {c}")));
        }
        total -= math::ln(posteriors.get(t, y));
    }
    Ok(total / labels.len() as f64)
}

/// Exact BPTT gradients of the mean cross-entropy.
///
/// With `horizon = Some(hz)` the recurrent error flow is cut at fixed
/// segment boundaries (frames `hz`, `2·hz`, ...), the classic truncated
/// BPTT scheme; `None` backpropagates through the whole sequence.
pub fn backward(
    params: &LstmParams,
    seq: &SparseSeq,
    cache: &Cache,
    labels: &[usize],
    horizon: Option<usize>,
) -> Result<LstmTensors> {
    let (d, h, c) = (params.input_dim, params.hidden_dim, params.n_classes);
    let t_len = seq.len();
    if cache.posteriors.rows() != t_len {
        return Err(Error::LengthMismatch(format!(
            "cache covers {} frames, input has {t_len}",
            cache.posteriors.rows()
        )));
    }
    if labels.len() != t_len {
        return Err(Error::LengthMismatch(format!(
            "{} labels for {t_len} frames",
            labels.len()
        )));
    }
    let g4 = 4 * h;
    let inv_t = 1.0 / t_len as f64;

    let mut grads = LstmTensors::zeros_like(params);
    let mut dh_rec = vec![0.0; h];
    let mut dc_rec = vec![0.0; h];
    let mut dh = vec![0.0; h];
    let mut dz = vec![0.0; g4];
    let mut dlogits = vec![0.0; c];

    for t in (0..t_len).rev() {
        let y = labels[t];
        if y >= c {
            return Err(Error::ValueOutOfRange(format!("label {y} at frame {t} exceeds {c}")));
        }
        // Softmax cross-entropy: dlogits = (p − onehot)/T.
        let prow = cache.posteriors.row(t);
        for (k, dv) in dlogits.iter_mut().enumerate() {
            *dv = (prow[k] - f64::from(u8::from(k == y))) * inv_t;
        }
        let hrow = cache.hidden.row(t);
        for (gv, dv) in grads.b_y.iter_mut().zip(&dlogits) {
            *gv += dv;
        }
        for k in 0..h {
            let hv = hrow[k];
            let grow = &mut grads.w_y[k * c..(k + 1) * c];
            for (gv, dv) in grow.iter_mut().zip(&dlogits) {
                *gv += hv * dv;
            }
        }
        // dh = W_y · dlogits + recurrent flow.
        for k in 0..h {
            let wrow = &params.w_y[k * c..(k + 1) * c];
            let mut acc = 0.0;
            for (wv, dv) in wrow.iter().zip(&dlogits) {
                acc += wv * dv;
            }
            dh[k] = acc + dh_rec[k];
        }

        let grow = cache.gates.row(t);
        let srow = cache.cell_sq.row(t);
        let c_prev_row: &[f64] = if t > 0 { cache.cell.row(t - 1) } else { &[] };
        for k in 0..h {
            let i_g = grow[k];
            let f_g = grow[h + k];
            let o_g = grow[2 * h + k];
            let g_g = grow[3 * h + k];
            let s = srow[k];
            let c_prev = if t > 0 { c_prev_row[k] } else { 0.0 };

            let do_ = dh[k] * s;
            let dc = dh[k] * o_g * s * (1.0 - s) + dc_rec[k];
            let di = dc * g_g;
            let df = dc * c_prev;
            let dg = dc * i_g;

            dz[k] = di * i_g * (1.0 - i_g);
            dz[h + k] = df * f_g * (1.0 - f_g);
            dz[2 * h + k] = do_ * o_g * (1.0 - o_g);
            dz[3 * h + k] = dg * g_g * (1.0 - g_g);
            dc_rec[k] = dc * f_g;
        }

        for (gv, dv) in grads.b.iter_mut().zip(&dz) {
            *gv += dv;
        }
        let frame = &seq.frames[t];
        for (&j, &x) in frame.idx.iter().zip(&frame.val) {
            let grow = &mut grads.w[(j as usize) * g4..(j as usize + 1) * g4];
            for (gv, dv) in grow.iter_mut().zip(&dz) {
                *gv += x * dv;
            }
        }
        if t > 0 {
            let hprev = cache.hidden.row(t - 1);
            for (kp, &hv) in hprev.iter().enumerate() {
                if hv != 0.0 {
                    let grow = &mut grads.w[(d + kp) * g4..(d + kp + 1) * g4];
                    for (gv, dv) in grow.iter_mut().zip(&dz) {
                        *gv += hv * dv;
                    }
                }
                let wrow = &params.w[(d + kp) * g4..(d + kp + 1) * g4];
                let mut acc = 0.0;
                for (wv, dv) in wrow.iter().zip(&dz) {
                    acc += wv * dv;
                }
                dh_rec[kp] = acc;
            }
            // Truncate error flow at segment boundaries.
            if let Some(hz) = horizon {
                if hz > 0 && t % hz == 0 {
                    dh_rec.fill(0.0);
                    dc_rec.fill(0.0);
                }
            }
        }
    }
    Ok(grads)
}

/// Momentum SGD with weight decay on weights (never on biases).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub max_iterations: usize,
    pub bptt_horizon: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.5,
            weight_decay: 0.001,
            momentum: 0.8,
            max_iterations: 10_000,
            bptt_horizon: None,
            seed: 0,
        }
    }
}

fn step_buffer(w: &mut [f64], g: &[f64], v: &mut [f64], lr: f64, mu: f64, decay: f64) {
    for ((wv, gv), vv) in w.iter_mut().zip(g).zip(v.iter_mut()) {
        *vv = mu * *vv - lr * (gv + decay * *wv);
        *wv += *vv;
    }
}

/// One parameter update: v ← μ·v − lr·(g + λ·w), w ← w + v.
pub fn sgd_step(
    params: &mut LstmParams,
    grads: &LstmTensors,
    velocity: &mut LstmTensors,
    cfg: &TrainConfig,
) {
    let (lr, mu, wd) = (cfg.learning_rate, cfg.momentum, cfg.weight_decay);
    step_buffer(&mut params.w, &grads.w, &mut velocity.w, lr, mu, wd);
    step_buffer(&mut params.w_y, &grads.w_y, &mut velocity.w_y, lr, mu, wd);
    step_buffer(&mut params.b, &grads.b, &mut velocity.b, lr, mu, 0.0);
    step_buffer(&mut params.b_y, &grads.b_y, &mut velocity.b_y, lr, mu, 0.0);
}

/// One utterance per iteration, order reshuffled every pass with the
/// seeded RNG. Returns the trained parameters and the per-iteration
/// cross-entropy trace.
pub fn train(
    mut params: LstmParams,
    dataset: &[(SparseSeq, Vec<usize>)],
    cfg: &TrainConfig,
) -> Result<(LstmParams, Vec<f64>)> {
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    for (n, (seq, labels)) in dataset.iter().enumerate() {
        if seq.dim != params.input_dim {
            return Err(Error::DimensionMismatch(format!(
                "utterance {n}: dim {} vs model dim {}",
                seq.dim, params.input_dim
            )));
        }
        if labels.len() != seq.len() {
            return Err(Error::LengthMismatch(format!(
                "utterance {n}: {} labels for {} frames",
                labels.len(),
                seq.len()
            )));
        }
        if labels.is_empty() {
            return Err(Error::InvalidArgument(format!("utterance {n} has no labels")));
        }
    }

    let mut rng = rng_from_seed(cfg.seed);
    let mut velocity = LstmTensors::zeros_like(&params);
    let mut trace = Vec::with_capacity(cfg.max_iterations);
    let mut order: Vec<usize> = (0..dataset.len()).collect();

    let mut iter = 0;
    'outer: loop {
        order.shuffle(&mut rng);
        for &n in &order {
            if iter >= cfg.max_iterations {
                break 'outer;
            }
            let (seq, labels) = &dataset[n];
            let (posteriors, cache) = forward(&params, seq)?;
            trace.push(loss(&posteriors, labels)?);
            let grads = backward(&params, seq, &cache, labels, cfg.bptt_horizon)?;
            sgd_step(&mut params, &grads, &mut velocity, cfg);
            iter += 1;
        }
    }
    Ok((params, trace))
}

/// Fraction of frames whose argmax posterior matches the label.
/// Argmax ties resolve to the lowest class index.
pub fn frame_accuracy(params: &LstmParams, dataset: &[(SparseSeq, Vec<usize>)]) -> Result<f64> {
    let mut hits = 0usize;
    let mut total = 0usize;
    for (seq, labels) in dataset {
        let (posteriors, _) = forward(params, seq)?;
        for (t, &y) in labels.iter().enumerate() {
            if argmax(posteriors.row(t)) == y {
                hits += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::InvalidArgument("no labeled frames".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// First index attaining the maximum (lowest-index tie rule).
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}
