//! Segmental embedded training for whole-word models.
//!
//! Flat start segments every utterance uniformly across its transcript
//! states; after that, passes of {force-align, reassign, re-estimate}
//! run until the aligned log-likelihood stalls, then mixtures grow by
//! splitting with a fixed number of passes after each split. The whole
//! procedure is deterministic: no randomness is involved.

use super::gmm::{em_update, GaussianMixture};
use super::hmm::{force_align, ModelSet, WordHmm};
use crate::mat::Mat;
use crate::{Error, Result};
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct HmmTrainConfig {
    pub states_per_word: usize,
    /// Mixture component targets, e.g. [1, 2, 4, 8, 15]. Must start at
    /// 1 and increase.
    pub schedule: Vec<usize>,
    pub variance_floor_ratio: f64,
    /// Cap on {align, re-estimate} passes before the first split.
    pub max_realign_iters: usize,
    /// Stop early once the aligned log-likelihood improves by less than
    /// this relative amount (0.0001 = 0.01%).
    pub rel_tol: f64,
    /// Re-estimation passes after each mixture split.
    pub passes_per_split: usize,
}

impl Default for HmmTrainConfig {
    fn default() -> Self {
        HmmTrainConfig {
            states_per_word: 4,
            schedule: super::gmm::mixture_schedule(15),
            variance_floor_ratio: super::gmm::DEFAULT_VARIANCE_FLOOR_RATIO,
            max_realign_iters: 20,
            rel_tol: 1e-4,
            passes_per_split: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub pass: usize,
    pub loglik: f64,
    pub components: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingReport {
    pub rows: Vec<ReportRow>,
    pub warnings: Vec<String>,
}

impl TrainingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pass,loglik,components\n");
        for r in &self.rows {
            out += &format!("{},{:.6},{}\n", r.pass, r.loglik, r.components);
        }
        out
    }
}

/// Per-(word, state) sufficient statistics from one alignment pass.
#[derive(Default)]
struct StateStats {
    frames: Vec<f64>,
    n_frames: usize,
    self_count: usize,
    advance_count: usize,
}

struct PassStats {
    per_state: BTreeMap<(String, usize), StateStats>,
    total_ll: f64,
}

fn collect_stats(
    models: &ModelSet,
    utterances: &[(Vec<String>, Mat)],
) -> Result<PassStats> {
    let mut per_state: BTreeMap<(String, usize), StateStats> = BTreeMap::new();
    let mut total_ll = 0.0;
    for (transcript, feats) in utterances {
        let (alignment, score) = force_align(models, transcript, feats)?;
        total_ll += score;
        let path = &alignment.path;
        for (t, &(wpos, state)) in path.iter().enumerate() {
            let key = (transcript[wpos].clone(), state);
            let entry = per_state.entry(key).or_default();
            entry.frames.extend_from_slice(feats.row(t));
            entry.n_frames += 1;
            if t + 1 < path.len() {
                if path[t + 1] == (wpos, state) {
                    entry.self_count += 1;
                } else {
                    entry.advance_count += 1;
                }
            } else {
                // Utterance end exits the final chain state.
                entry.advance_count += 1;
            }
        }
    }
    Ok(PassStats { per_state, total_ll })
}

/// One re-estimation step from alignment statistics: each state's GMM
/// gets one EM sweep over its assigned frames, transitions come from
/// the self/advance counts. Starved states keep their old parameters.
fn reestimate(
    models: &ModelSet,
    stats: &PassStats,
    floor: &[f64],
    pass: usize,
    warnings: &mut Vec<String>,
) -> Result<ModelSet> {
    let dim = floor.len();
    let mut rebuilt = Vec::with_capacity(models.words().len());
    for hmm in models.words() {
        let mut states = Vec::with_capacity(hmm.n_states());
        let mut self_probs = Vec::with_capacity(hmm.n_states());
        for s in 0..hmm.n_states() {
            let key = (String::from(hmm.word()), s);
            match stats.per_state.get(&key) {
                Some(st) if st.n_frames > 0 => {
                    let data = Mat::from_vec(st.n_frames, dim, st.frames.clone());
                    let (gmm, _) = em_update(&hmm.states()[s], &data, floor)?;
                    states.push(gmm);
                    let total = (st.self_count + st.advance_count) as f64;
                    self_probs.push(st.self_count as f64 / total);
                }
                _ => {
                    warnings.push(format!(
                        "pass {pass}: state {s} of '{}' received no frames; kept previous estimate",
                        hmm.word()
                    ));
                    states.push(hmm.states()[s].clone());
                    self_probs.push(crate::math::exp(hmm.log_self(s)));
                }
            }
        }
        rebuilt.push(WordHmm::new(String::from(hmm.word()), states, &self_probs)?);
    }
    ModelSet::new(rebuilt)
}

/// Stacks every frame of every utterance (for the global floor).
fn stack_frames(utterances: &[(Vec<String>, Mat)]) -> Mat {
    let dim = utterances[0].1.cols();
    let total: usize = utterances.iter().map(|(_, f)| f.rows()).sum();
    let mut data = Vec::with_capacity(total * dim);
    for (_, f) in utterances {
        data.extend_from_slice(f.data());
    }
    Mat::from_vec(total, dim, data)
}

fn flat_start(
    utterances: &[(Vec<String>, Mat)],
    lexicon: &BTreeSet<String>,
    cfg: &HmmTrainConfig,
    floor: &[f64],
) -> Result<ModelSet> {
    let spw = cfg.states_per_word;
    let dim = floor.len();
    let mut per_state: BTreeMap<(String, usize), StateStats> = BTreeMap::new();
    for (transcript, feats) in utterances {
        let s_total = spw * transcript.len();
        let t_len = feats.rows();
        // Uniform segmentation: chain state s covers frames
        // [s·T/S, (s+1)·T/S); non-empty because T ≥ S.
        for s in 0..s_total {
            let lo = s * t_len / s_total;
            let hi = (s + 1) * t_len / s_total;
            let word = &transcript[s / spw];
            let state = s % spw;
            let entry = per_state.entry((word.clone(), state)).or_default();
            for t in lo..hi {
                entry.frames.extend_from_slice(feats.row(t));
                entry.n_frames += 1;
            }
            entry.self_count += hi - lo - 1;
            entry.advance_count += 1;
        }
    }

    let mut words = Vec::with_capacity(lexicon.len());
    for word in lexicon {
        let mut states = Vec::with_capacity(spw);
        let mut self_probs = Vec::with_capacity(spw);
        for s in 0..spw {
            let st = per_state
                .get(&(word.clone(), s))
                .expect("lexicon word must appear in some transcript");
            let data = Mat::from_vec(st.n_frames, dim, st.frames.clone());
            let seed_gmm = single_gaussian_ml(&data, floor);
            states.push(seed_gmm);
            let total = (st.self_count + st.advance_count) as f64;
            self_probs.push(st.self_count as f64 / total);
        }
        words.push(WordHmm::new(word.clone(), states, &self_probs)?);
    }
    ModelSet::new(words)
}

/// Exact ML single Gaussian with floored diagonal variance.
fn single_gaussian_ml(data: &Mat, floor: &[f64]) -> GaussianMixture {
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
    for (v, &f) in var.iter_mut().zip(floor) {
        *v /= n;
        if *v < f {
            *v = f;
        }
    }
    GaussianMixture::new(vec![1.0], Mat::from_vec(1, m, mean), Mat::from_vec(1, m, var)).unwrap()
}

fn validate(utterances: &[(Vec<String>, Mat)], cfg: &HmmTrainConfig) -> Result<()> {
    if utterances.is_empty() {
        return Err(Error::InvalidArgument("no training utterances".into()));
    }
    if cfg.states_per_word == 0 {
        return Err(Error::InvalidArgument("states_per_word must be ≥ 1".into()));
    }
    if cfg.schedule.first() != Some(&1) || cfg.schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(format!(
            "mixture schedule must start at 1 and increase, got {:?}",
            cfg.schedule
        )));
    }
    let dim = utterances[0].1.cols();
    for (i, (transcript, feats)) in utterances.iter().enumerate() {
        if transcript.is_empty() {
            return Err(Error::InvalidArgument(format!("utterance {i} has an empty transcript")));
        }
        if feats.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "utterance {i} has dim {}, expected {dim}",
                feats.cols()
            )));
        }
        let needed = cfg.states_per_word * transcript.len();
        if feats.rows() < needed {
            return Err(Error::InvalidArgument(format!(
                "utterance {i}: {} frames cannot cover {needed} states",
                feats.rows()
            )));
        }
        if !feats.is_finite() {
            return Err(Error::InvalidArgument(format!("utterance {i} has non-finite features")));
        }
    }
    Ok(())
}

/// Trains one HMM per lexicon word over the transcribed utterances.
pub fn embedded_train(
    utterances: &[(Vec<String>, Mat)],
    cfg: &HmmTrainConfig,
) -> Result<(ModelSet, TrainingReport)> {
    validate(utterances, cfg)?;
    let all_frames = stack_frames(utterances);
    let floor = super::gmm::variance_floor(&all_frames, cfg.variance_floor_ratio);
    drop(all_frames);
    let lexicon: BTreeSet<String> = utterances
        .iter()
        .flat_map(|(t, _)| t.iter().cloned())
        .collect();

    let mut report = TrainingReport::default();
    let mut models = flat_start(utterances, &lexicon, cfg, &floor)?;
    let mut pass = 0;

    // Single-component refinement until the aligned score stalls.
    let mut prev_ll = f64::NEG_INFINITY;
    for _ in 0..cfg.max_realign_iters {
        let stats = collect_stats(&models, utterances)?;
        pass += 1;
        report.rows.push(ReportRow { pass, loglik: stats.total_ll, components: 1 });
        let improved = if prev_ll.is_finite() {
            (stats.total_ll - prev_ll) / crate::math::abs(prev_ll).max(1.0) >= cfg.rel_tol
        } else {
            true
        };
        if !improved {
            break;
        }
        models = reestimate(&models, &stats, &floor, pass, &mut report.warnings)?;
        prev_ll = stats.total_ll;
    }

    // Mixture growth: split, then a fixed number of passes.
    for &target in cfg.schedule.iter().skip(1) {
        models = split_models(&models, target)?;
        for _ in 0..cfg.passes_per_split {
            let stats = collect_stats(&models, utterances)?;
            pass += 1;
            report.rows.push(ReportRow { pass, loglik: stats.total_ll, components: target });
            models = reestimate(&models, &stats, &floor, pass, &mut report.warnings)?;
        }
    }
    Ok((models, report))
}

fn split_models(models: &ModelSet, target: usize) -> Result<ModelSet> {
    let mut words = Vec::with_capacity(models.words().len());
    for hmm in models.words() {
        let states: Vec<GaussianMixture> = hmm
            .states()
            .iter()
            .map(|g| super::gmm::split_mixtures(g, target))
            .collect();
        let probs: Vec<f64> = (0..hmm.n_states())
            .map(|s| crate::math::exp(hmm.log_self(s)))
            .collect();
        words.push(WordHmm::new(String::from(hmm.word()), states, &probs)?);
    }
    ModelSet::new(words)
}
