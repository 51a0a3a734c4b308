//! Independent reference implementations the acceptance checks compare
//! against: a per-pixel feature pipeline, edit-distance alignment with
//! the documented tie preference, and exhaustive path enumeration for
//! chain decoding.

use lipvsr_core::gmmhmm::ModelSet;
use lipvsr_core::image::GrayImage;
use lipvsr_core::pcanet::{FilterBank, PcanetConfig};
use lipvsr_core::Mat;

/// Same-size correlation with zero padding, one fresh double loop per
/// output pixel.
pub fn naive_conv(img: &GrayImage, kernel: &[f64], k: usize) -> GrayImage {
    let pad = (k - 1) / 2;
    let mut out = GrayImage::zeros(img.width, img.height);
    for r in 0..img.height {
        for c in 0..img.width {
            let mut acc = 0.0;
            for dr in 0..k {
                for dc in 0..k {
                    let ir = r + dr;
                    let ic = c + dc;
                    if ir < pad || ic < pad {
                        continue;
                    }
                    let (ir, ic) = (ir - pad, ic - pad);
                    if ir >= img.height || ic >= img.width {
                        continue;
                    }
                    acc += kernel[dr * k + dc] * img.get(ir, ic);
                }
            }
            out.set(r, c, acc);
        }
    }
    out
}

/// The whole two-stage feature pipeline, written as plainly as possible:
/// correlate, threshold-stack, max-pool, then block histograms over the
/// balanced partition.
pub fn naive_feature(
    frame: &GrayImage,
    bank1: &FilterBank,
    bank2: &FilterBank,
    cfg: &PcanetConfig,
) -> Vec<f64> {
    let k = cfg.patch_side;
    let mut feature = Vec::new();
    for f1 in &bank1.filters {
        let parent = naive_conv(frame, f1, k);
        let maps: Vec<GrayImage> =
            bank2.filters.iter().map(|f2| naive_conv(&parent, f2, k)).collect();

        let (w, h) = (parent.width, parent.height);
        let mut hash = vec![0u32; w * h];
        for (li, map) in maps.iter().enumerate() {
            for r in 0..h {
                for c in 0..w {
                    if map.get(r, c) > 0.0 {
                        hash[r * w + c] += 1 << li;
                    }
                }
            }
        }

        let pw = w.div_ceil(cfg.pool_stride);
        let ph = h.div_ceil(cfg.pool_stride);
        let mut pooled = vec![0u32; pw * ph];
        for br in 0..ph {
            for bc in 0..pw {
                let mut m = 0u32;
                for r in br * cfg.pool_stride..(br * cfg.pool_stride + cfg.pool_window).min(h) {
                    for c in bc * cfg.pool_stride..(bc * cfg.pool_stride + cfg.pool_window).min(w) {
                        m = m.max(hash[r * w + c]);
                    }
                }
                pooled[br * pw + bc] = m;
            }
        }

        let bounds = |n: usize, g: usize| -> Vec<usize> {
            let mut b = vec![0];
            for i in 0..g {
                b.push(b[i] + n / g + usize::from(i >= g - n % g && n % g != 0));
            }
            b
        };
        let rb = bounds(ph, cfg.block_grid);
        let cb = bounds(pw, cfg.block_grid);
        for br in 0..cfg.block_grid {
            for bc in 0..cfg.block_grid {
                let mut hist = vec![0.0; cfg.bins];
                for r in rb[br]..rb[br + 1] {
                    for c in cb[bc]..cb[bc + 1] {
                        hist[pooled[r * pw + c] as usize] += 1.0;
                    }
                }
                feature.extend(hist);
            }
        }
    }
    feature
}

/// Alignment tallies in the order (hits, substitutions, deletions,
/// insertions).
pub type Counts = (usize, usize, usize, usize);

/// Minimum-edit counts by forward propagation: each cell keeps the
/// tallies of the path chosen by the preference diagonal, then
/// deletion, then insertion among cost-minimal predecessors. That is
/// the same preference a traceback applies, reached without one.
pub fn edit_oracle(reference: &[u8], hypothesis: &[u8]) -> (usize, Counts) {
    let n = reference.len();
    let m = hypothesis.len();
    let w = m + 1;
    // (cost, h, s, d, i) per cell.
    let mut cell = vec![(0usize, 0usize, 0usize, 0usize, 0usize); (n + 1) * w];
    for j in 1..=m {
        cell[j] = (j, 0, 0, 0, j);
    }
    for i in 1..=n {
        cell[i * w] = (i, 0, 0, i, 0);
        for j in 1..=m {
            let sub_cost = usize::from(reference[i - 1] != hypothesis[j - 1]);
            let diag = cell[(i - 1) * w + j - 1].0 + sub_cost;
            let del = cell[(i - 1) * w + j].0 + 1;
            let ins = cell[i * w + j - 1].0 + 1;
            let best = diag.min(del).min(ins);
            let (_, h, s, d, ins_c) = if diag == best {
                let p = cell[(i - 1) * w + j - 1];
                if sub_cost == 0 {
                    (p.0, p.1 + 1, p.2, p.3, p.4)
                } else {
                    (p.0, p.1, p.2 + 1, p.3, p.4)
                }
            } else if del == best {
                let p = cell[(i - 1) * w + j];
                (p.0, p.1, p.2, p.3 + 1, p.4)
            } else {
                let p = cell[i * w + j - 1];
                (p.0, p.1, p.2, p.3, p.4 + 1)
            };
            cell[i * w + j] = (best, h, s, d, ins_c);
        }
    }
    let (cost, h, s, d, i) = cell[n * w + m];
    (cost, (h, s, d, i))
}

/// Plain Levenshtein distance with a rolling row, independent of the
/// count propagation above.
pub fn levenshtein(a: &[u8], b: &[u8]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        core::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Best log score of one phrase by exhaustive enumeration over state
/// durations: every monotone path visits each chain state at least one
/// frame, pays (duration − 1) self-loops plus one advance per state
/// (the last advance is the exit), and emits every frame. `None` when
/// the phrase has more states than frames.
pub fn enumerate_phrase_score(models: &ModelSet, words: &[String], obs: &Mat) -> Option<f64> {
    let mut emit = Vec::new();
    let mut log_self = Vec::new();
    let mut log_next = Vec::new();
    for word in words {
        let hmm = models.get(word).expect("word has a model");
        for s in 0..hmm.n_states() {
            emit.push(&hmm.states()[s]);
            log_self.push(hmm.log_self(s));
            log_next.push(hmm.log_next(s));
        }
    }
    let s_len = emit.len();
    let t_len = obs.rows();
    if t_len < s_len {
        return None;
    }
    // Emission table, state-major.
    let mut ll = Mat::zeros(s_len, t_len);
    for s in 0..s_len {
        for t in 0..t_len {
            ll.set(s, t, emit[s].log_pdf(obs.row(t)).expect("dims agree"));
        }
    }

    fn rec(
        s: usize,
        t0: usize,
        s_len: usize,
        t_len: usize,
        ll: &Mat,
        log_self: &[f64],
        log_next: &[f64],
        best: &mut f64,
        acc: f64,
    ) {
        let remaining_states = s_len - s - 1;
        // Durations leaving at least one frame per remaining state.
        for dur in 1..=(t_len - t0 - remaining_states) {
            let mut score = acc + log_next[s] + (dur - 1) as f64 * log_self[s];
            for t in t0..t0 + dur {
                score += ll.get(s, t);
            }
            if s + 1 == s_len {
                if t0 + dur == t_len && score > *best {
                    *best = score;
                }
            } else {
                rec(s + 1, t0 + dur, s_len, t_len, ll, log_self, log_next, best, score);
            }
        }
    }

    let mut best = f64::NEG_INFINITY;
    rec(0, 0, s_len, t_len, &ll, &log_self, &log_next, &mut best, 0.0);
    (best > f64::NEG_INFINITY).then_some(best)
}

/// Sample mean and population variance per dimension, the closed-form
/// single-Gaussian maximum-likelihood fit.
pub fn gaussian_ml(data: &Mat) -> (Vec<f64>, Vec<f64>) {
    let (n, d) = (data.rows(), data.cols());
    let mut mean = vec![0.0; d];
    for row in data.iter_rows() {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for row in data.iter_rows() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    for v in &mut var {
        *v /= n as f64;
    }
    (mean, var)
}
