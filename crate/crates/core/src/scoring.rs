//! Recognition metrics: word correctness/accuracy from a minimum-edit
//! alignment, sentence correctness, and frame-level accuracy with an
//! optional phoneme-to-viseme grouping.

use crate::{Error, Result};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Word-level alignment tallies. `H + S + D = N` by construction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AlignmentCounts {
    pub hits: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_len: usize,
}

impl AlignmentCounts {
    pub fn edit_cost(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn merge(&mut self, other: &AlignmentCounts) {
        self.hits += other.hits;
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.reference_len += other.reference_len;
    }
}

/// Unit-cost minimum-edit alignment. Among minimal alignments the
/// traceback prefers, at every cell, match/substitution over deletion
/// over insertion, which pins the counts uniquely.
pub fn align_words<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> AlignmentCounts {
    let n = reference.len();
    let m = hypothesis.len();
    let width = m + 1;
    let mut d = vec![0usize; (n + 1) * width];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * width] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * width + j - 1]
                + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * width + j] + 1;
            let ins = d[i * width + j - 1] + 1;
            d[i * width + j] = sub.min(del).min(ins);
        }
    }

    let mut counts = AlignmentCounts {
        hits: 0,
        substitutions: 0,
        deletions: 0,
        insertions: 0,
        reference_len: n,
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * width + j];
        if i > 0 && j > 0 {
            let eq = reference[i - 1] == hypothesis[j - 1];
            if d[(i - 1) * width + j - 1] + usize::from(!eq) == here {
                if eq {
                    counts.hits += 1;
                } else {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * width + j] + 1 == here {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}

/// (H − I)/N · 100; can go negative when insertions outnumber hits.
pub fn accuracy(counts: &AlignmentCounts) -> Result<f64> {
    if counts.reference_len == 0 {
        return Err(Error::InvalidArgument("accuracy undefined for empty reference".into()));
    }
    Ok((counts.hits as f64 - counts.insertions as f64) / counts.reference_len as f64 * 100.0)
}

/// H/N · 100.
pub fn correctness(counts: &AlignmentCounts) -> Result<f64> {
    if counts.reference_len == 0 {
        return Err(Error::InvalidArgument(
            "correctness undefined for empty reference".into(),
        ));
    }
    Ok(counts.hits as f64 / counts.reference_len as f64 * 100.0)
}

/// Percentage of hypothesis sequences equal to their reference.
pub fn sentence_correctness<T: PartialEq>(pairs: &[(&[T], &[T])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no sentence pairs".into()));
    }
    let exact = pairs.iter().filter(|(r, h)| r == h).count();
    Ok(exact as f64 / pairs.len() as f64 * 100.0)
}

/// Surjective grouping of phoneme classes onto viseme classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisemeMap {
    map: Vec<usize>,
    n_visemes: usize,
}

impl VisemeMap {
    /// `map[p]` is the viseme for phoneme class `p`. Every viseme index
    /// below `n_visemes` must be hit by at least one phoneme.
    pub fn new(map: Vec<usize>, n_visemes: usize) -> Result<Self> {
        if map.is_empty() || n_visemes == 0 {
            return Err(Error::InvalidArgument("empty viseme map".into()));
        }
        let mut seen = vec![false; n_visemes];
        for (p, &v) in map.iter().enumerate() {
            if v >= n_visemes {
                return Err(Error::ValueOutOfRange(format!(
                    "phoneme {p} maps to viseme {v}, but only {n_visemes} visemes exist"
                )));
            }
            seen[v] = true;
        }
        if let Some(v) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!("viseme {v} has no phonemes")));
        }
        Ok(VisemeMap { map, n_visemes })
    }

    pub fn viseme(&self, phoneme: usize) -> Result<usize> {
        self.map.get(phoneme).copied().ok_or_else(|| {
            Error::ValueOutOfRange(format!(
                "phoneme class {phoneme} outside mapped range {}",
                self.map.len()
            ))
        })
    }

    pub fn n_phonemes(&self) -> usize {
        self.map.len()
    }

    pub fn n_visemes(&self) -> usize {
        self.n_visemes
    }

    pub fn entries(&self) -> &[usize] {
        &self.map
    }
}

/// Percent of frames matching, at phoneme level or (with a map) after
/// grouping both sides into visemes.
pub fn frame_accuracy(
    labels: &[usize],
    predictions: &[usize],
    map: Option<&VisemeMap>,
) -> Result<f64> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch(format!(
            "{} labels vs {} predictions",
            labels.len(),
            predictions.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no frames to score".into()));
    }
    let mut hits = 0usize;
    for (&y, &p) in labels.iter().zip(predictions) {
        let matched = match map {
            Some(vm) => vm.viseme(y)? == vm.viseme(p)?,
            None => y == p,
        };
        hits += usize::from(matched);
    }
    Ok(hits as f64 / labels.len() as f64 * 100.0)
}

/// One speaker's metrics under one view (or view combination).
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerResult {
    pub speaker: String,
    pub view: String,
    pub sentence_correctness: f64,
    pub word_correctness: f64,
    pub word_accuracy: f64,
}

/// Mean and sample standard deviation across speakers for one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSummary {
    pub view: String,
    pub n_speakers: usize,
    /// SC, WC, WA means.
    pub mean: [f64; 3],
    /// SC, WC, WA sample standard deviations (n−1); 0.0 for n=1.
    pub sd: [f64; 3],
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, crate::math::sqrt(ss / (n - 1.0)))
}

/// Per-view mean ± SD across speakers, views in first-appearance order.
pub fn summarize(rows: &[SpeakerResult]) -> Result<Vec<ViewSummary>> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no speaker results".into()));
    }
    let mut views: Vec<&str> = Vec::new();
    for r in rows {
        if !views.contains(&r.view.as_str()) {
            views.push(&r.view);
        }
    }
    let mut out = Vec::with_capacity(views.len());
    for view in views {
        let mut cols: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for r in rows.iter().filter(|r| r.view == view) {
            cols[0].push(r.sentence_correctness);
            cols[1].push(r.word_correctness);
            cols[2].push(r.word_accuracy);
        }
        let mut mean = [0.0; 3];
        let mut sd = [0.0; 3];
        for k in 0..3 {
            let (m, s) = mean_sd(&cols[k]);
            mean[k] = m;
            sd[k] = s;
        }
        out.push(ViewSummary { view: String::from(view), n_speakers: cols[0].len(), mean, sd });
    }
    Ok(out)
}

/// `speaker,view,SC,WC,WA` rows followed by per-view mean and sd rows.
pub fn render_csv(rows: &[SpeakerResult], summaries: &[ViewSummary]) -> String {
    let mut out = String::from("speaker,view,SC,WC,WA\n");
    for r in rows {
        out += &format!(
            "{},{},{:.4},{:.4},{:.4}\n",
            r.speaker, r.view, r.sentence_correctness, r.word_correctness, r.word_accuracy
        );
    }
    for s in summaries {
        out += &format!(
            "mean,{},{:.4},{:.4},{:.4}\n",
            s.view, s.mean[0], s.mean[1], s.mean[2]
        );
        out += &format!("sd,{},{:.4},{:.4},{:.4}\n", s.view, s.sd[0], s.sd[1], s.sd[2]);
    }
    out
}

/// Fixed-width table with per-view mean ± SD footer lines.
pub fn render_text(rows: &[SpeakerResult], summaries: &[ViewSummary]) -> String {
    let mut out = format!("{:<12} {:<10} {:>8} {:>8} {:>8}\n", "speaker", "view", "SC", "WC", "WA");
    for r in rows {
        out += &format!(
            "{:<12} {:<10} {:>8.1} {:>8.1} {:>8.1}\n",
            r.speaker, r.view, r.sentence_correctness, r.word_correctness, r.word_accuracy
        );
    }
    for s in summaries {
        out += &format!(
            "{:<12} {:<10} {:>4.1} ± {:>4.1} | {:>4.1} ± {:>4.1} | {:>4.1} ± {:>4.1}\n",
            "mean/sd", s.view, s.mean[0], s.sd[0], s.mean[1], s.sd[1], s.mean[2], s.sd[2]
        );
    }
    out
}
