//! Left-to-right word HMMs and exact Viterbi over small grammars.

use super::gmm::GaussianMixture;
use crate::mat::Mat;
use crate::math;
use crate::{Error, Result};
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// Transition probabilities stay inside [1e-3, 1−1e-3] so no state can
/// become a trap or a pass-through with zero mass.
const TRANS_CLAMP: f64 = 1e-3;

const NEG_INF: f64 = f64::NEG_INFINITY;

/// A whole-word model: emitting states in a strict self/next chain.
///
/// The log transition matrix is indexed over {enter, s1..sN, exit};
/// enter feeds s1 with probability 1, each state loops or advances, and
/// exit is absorbing. No skips.
#[derive(Debug, Clone, PartialEq)]
pub struct WordHmm {
    word: String,
    states: Vec<GaussianMixture>,
    log_trans: Mat,
}

impl WordHmm {
    /// Builds the chain from per-state self-loop probabilities, clamped
    /// away from 0 and 1.
    pub fn new(word: String, states: Vec<GaussianMixture>, self_probs: &[f64]) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidArgument(format!("word '{word}' has no states")));
        }
        if self_probs.len() != n {
            return Err(Error::LengthMismatch(format!(
                "word '{word}': {} self-loop probabilities for {n} states",
                self_probs.len()
            )));
        }
        let dim = states[0].dim();
        if states.iter().any(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "word '{word}': states disagree on feature dim"
            )));
        }
        let mut log_trans = Mat::zeros(n + 2, n + 2);
        log_trans.data_mut().fill(NEG_INF);
        log_trans.set(0, 1, 0.0);
        for (i, &p) in self_probs.iter().enumerate() {
            let p = p.clamp(TRANS_CLAMP, 1.0 - TRANS_CLAMP);
            log_trans.set(1 + i, 1 + i, math::ln(p));
            log_trans.set(1 + i, 2 + i, math::ln(1.0 - p));
        }
        log_trans.set(n + 1, n + 1, 0.0);
        Ok(WordHmm { word, states, log_trans })
    }

    /// Restores a model from its serialized parts, checking the
    /// self/next sparsity pattern and per-row normalization.
    pub fn from_parts(word: String, states: Vec<GaussianMixture>, log_trans: Mat) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidArgument(format!("word '{word}' has no states")));
        }
        if log_trans.rows() != n + 2 || log_trans.cols() != n + 2 {
            return Err(Error::DimensionMismatch(format!(
                "word '{word}': transition matrix {}×{}, expected {}×{}",
                log_trans.rows(),
                log_trans.cols(),
                n + 2,
                n + 2
            )));
        }
        for r in 0..n + 2 {
            let mut mass = 0.0;
            for c in 0..n + 2 {
                let v = log_trans.get(r, c);
                let allowed = (r == 0 && c == 1)
                    || (r >= 1 && r <= n && (c == r || c == r + 1))
                    || (r == n + 1 && c == n + 1);
                if allowed {
                    mass += math::exp(v);
                } else if v != NEG_INF {
                    return Err(Error::ValueOutOfRange(format!(
                        "word '{word}': transition {r}→{c} must be impossible"
                    )));
                }
            }
            if math::abs(mass - 1.0) > 1e-6 {
                return Err(Error::ValueOutOfRange(format!(
                    "word '{word}': transition row {r} sums to {mass}"
                )));
            }
        }
        Ok(WordHmm { word, states, log_trans })
    }

    pub fn word(&self) -> &str {
        &self.word
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[GaussianMixture] {
        &self.states
    }

    pub fn log_trans(&self) -> &Mat {
        &self.log_trans
    }

    /// log a_ii for emitting state `i` (0-based).
    pub fn log_self(&self, i: usize) -> f64 {
        self.log_trans.get(1 + i, 1 + i)
    }

    /// log a_i,i+1 (to the next state, or to exit for the last state).
    pub fn log_next(&self, i: usize) -> f64 {
        self.log_trans.get(1 + i, 2 + i)
    }
}

/// All word models for a task; words are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSet {
    words: Vec<WordHmm>,
}

impl ModelSet {
    pub fn new(words: Vec<WordHmm>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for w in &words {
            if !seen.insert(w.word()) {
                return Err(Error::InvalidArgument(format!("duplicate word model '{}'", w.word())));
            }
        }
        if words.is_empty() {
            return Err(Error::InvalidArgument("empty model set".into()));
        }
        Ok(ModelSet { words })
    }

    pub fn get(&self, word: &str) -> Option<&WordHmm> {
        self.words.iter().find(|w| w.word() == word)
    }

    pub fn words(&self) -> &[WordHmm] {
        &self.words
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrammarMode {
    PhraseList,
    WordLoop,
}

/// Decoding grammar: a closed list of phrases, or a free loop over the
/// lexicon with a uniform word-entry penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct Grammar {
    mode: GrammarMode,
    phrases: Vec<Vec<String>>,
    lexicon: Vec<String>,
}

impl Grammar {
    pub fn phrase_list(phrases: Vec<Vec<String>>) -> Result<Self> {
        if phrases.is_empty() || phrases.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("grammar needs non-empty phrases".into()));
        }
        let lexicon: BTreeSet<String> = phrases.iter().flatten().cloned().collect();
        Ok(Grammar {
            mode: GrammarMode::PhraseList,
            phrases,
            lexicon: lexicon.into_iter().collect(),
        })
    }

    pub fn word_loop(lexicon: Vec<String>) -> Result<Self> {
        if lexicon.is_empty() {
            return Err(Error::InvalidArgument("empty lexicon".into()));
        }
        let unique: BTreeSet<String> = lexicon.into_iter().collect();
        Ok(Grammar {
            mode: GrammarMode::WordLoop,
            phrases: Vec::new(),
            lexicon: unique.into_iter().collect(),
        })
    }

    pub fn mode(&self) -> GrammarMode {
        self.mode
    }

    pub fn phrases(&self) -> &[Vec<String>] {
        &self.phrases
    }

    pub fn lexicon(&self) -> &[String] {
        &self.lexicon
    }
}

/// Per-frame (word position, state within word) path; both monotone.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub path: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Index into the grammar's phrase list; `None` in word-loop mode.
    pub phrase_index: Option<usize>,
    pub words: Vec<String>,
    pub log_score: f64,
    pub alignment: Alignment,
}

/// One phrase flattened into a linear chain of emitting states.
struct Chain<'a> {
    emit: Vec<&'a GaussianMixture>,
    log_self: Vec<f64>,
    log_next: Vec<f64>,
    word_of: Vec<usize>,
    state_of: Vec<usize>,
}

impl<'a> Chain<'a> {
    fn build(models: &'a ModelSet, words: &[String]) -> Result<Self> {
        let mut chain = Chain {
            emit: Vec::new(),
            log_self: Vec::new(),
            log_next: Vec::new(),
            word_of: Vec::new(),
            state_of: Vec::new(),
        };
        for (wi, word) in words.iter().enumerate() {
            let hmm = models
                .get(word)
                .ok_or_else(|| Error::InvalidArgument(format!("no model for word '{word}'")))?;
            for s in 0..hmm.n_states() {
                chain.emit.push(&hmm.states()[s]);
                chain.log_self.push(hmm.log_self(s));
                chain.log_next.push(hmm.log_next(s));
                chain.word_of.push(wi);
                chain.state_of.push(s);
            }
        }
        Ok(chain)
    }

    fn len(&self) -> usize {
        self.emit.len()
    }
}

/// Exact best path through one chain. `None` when no legal path exists
/// (fewer frames than states). Ties prefer the advancing predecessor,
/// which keeps earlier frames in lower state indices.
fn decode_chain(chain: &Chain, obs: &Mat) -> Result<Option<(f64, Alignment)>> {
    let s_len = chain.len();
    let t_len = obs.rows();
    if t_len < s_len {
        return Ok(None);
    }
    let mut delta = vec![NEG_INF; s_len];
    let mut next_delta = vec![NEG_INF; s_len];
    // true = entered from the previous state, false = self-loop.
    let mut advanced = vec![false; t_len * s_len];

    delta[0] = chain.emit[0].log_pdf(obs.row(0))?;
    for t in 1..t_len {
        // Reachability window keeps the DP exact but skips dead states:
        // state s needs s frames before it and s_len−1−s frames after.
        let lo = s_len.saturating_sub(t_len - t);
        let hi = t.min(s_len - 1);
        for s in 0..s_len {
            next_delta[s] = NEG_INF;
        }
        for s in lo..=hi {
            let stay = if delta[s] == NEG_INF { NEG_INF } else { delta[s] + chain.log_self[s] };
            let enter = if s > 0 && delta[s - 1] != NEG_INF {
                delta[s - 1] + chain.log_next[s - 1]
            } else {
                NEG_INF
            };
            let (best, from_prev) = if enter >= stay { (enter, true) } else { (stay, false) };
            if best == NEG_INF {
                continue;
            }
            advanced[t * s_len + s] = from_prev;
            next_delta[s] = best + chain.emit[s].log_pdf(obs.row(t))?;
        }
        core::mem::swap(&mut delta, &mut next_delta);
    }

    let final_score = delta[s_len - 1] + chain.log_next[s_len - 1];
    if final_score == NEG_INF || final_score.is_nan() {
        return Ok(None);
    }
    let mut path = vec![(0usize, 0usize); t_len];
    let mut s = s_len - 1;
    for t in (0..t_len).rev() {
        path[t] = (chain.word_of[s], chain.state_of[s]);
        if t > 0 && advanced[t * s_len + s] {
            s -= 1;
        }
    }
    Ok(Some((final_score, Alignment { path })))
}

/// Best phrase (or word sequence) for the observations.
///
/// Phrase-list mode scores every phrase chain including its exit mass;
/// ties go to the lower phrase index. Word-loop mode charges a uniform
/// log(1/|lexicon|) penalty at every word entry.
pub fn viterbi_decode(models: &ModelSet, grammar: &Grammar, obs: &Mat) -> Result<DecodeResult> {
    if obs.rows() == 0 {
        return Err(Error::InvalidArgument("no observation frames".into()));
    }
    match grammar.mode() {
        GrammarMode::PhraseList => {
            let mut best: Option<DecodeResult> = None;
            for (pi, phrase) in grammar.phrases().iter().enumerate() {
                let chain = Chain::build(models, phrase)?;
                if let Some((score, alignment)) = decode_chain(&chain, obs)? {
                    let better = match &best {
                        Some(b) => score > b.log_score,
                        None => true,
                    };
                    if better {
                        best = Some(DecodeResult {
                            phrase_index: Some(pi),
                            words: phrase.clone(),
                            log_score: score,
                            alignment,
                        });
                    }
                }
            }
            best.ok_or_else(|| {
                Error::NoPath(format!(
                    "no phrase fits {} frames (shortest phrase needs more states)",
                    obs.rows()
                ))
            })
        }
        GrammarMode::WordLoop => word_loop_decode(models, grammar.lexicon(), obs),
    }
}

/// Viterbi restricted to one known word sequence.
pub fn force_align(models: &ModelSet, words: &[String], obs: &Mat) -> Result<(Alignment, f64)> {
    if words.is_empty() {
        return Err(Error::InvalidArgument("empty word sequence".into()));
    }
    let chain = Chain::build(models, words)?;
    match decode_chain(&chain, obs)? {
        Some((score, alignment)) => Ok((alignment, score)),
        None => Err(Error::NoPath(format!(
            "{} frames cannot cover {} states of '{}'",
            obs.rows(),
            chain.len(),
            words.join(" ")
        ))),
    }
}

fn word_loop_decode(models: &ModelSet, lexicon: &[String], obs: &Mat) -> Result<DecodeResult> {
    struct LoopState<'a> {
        emit: &'a GaussianMixture,
        log_self: f64,
        log_next: f64,
        state_idx: usize,
        last_of_word: bool,
        word: usize,
    }
    let mut states: Vec<LoopState> = Vec::new();
    for (wi, word) in lexicon.iter().enumerate() {
        let hmm = models
            .get(word)
            .ok_or_else(|| Error::InvalidArgument(format!("no model for word '{word}'")))?;
        for s in 0..hmm.n_states() {
            states.push(LoopState {
                emit: &hmm.states()[s],
                log_self: hmm.log_self(s),
                log_next: hmm.log_next(s),
                state_idx: s,
                last_of_word: s == hmm.n_states() - 1,
                word: wi,
            });
        }
    }
    let n = states.len();
    let t_len = obs.rows();
    let entry_penalty = -math::ln(lexicon.len() as f64);

    let mut delta = vec![NEG_INF; n];
    let mut prev_state = vec![usize::MAX; t_len * n];
    // Marks frames whose best move crossed a word boundary (exit→enter).
    let mut entered = vec![false; t_len * n];
    for (s, st) in states.iter().enumerate() {
        if st.state_idx == 0 {
            delta[s] = entry_penalty + st.emit.log_pdf(obs.row(0))?;
            entered[s] = true;
        }
    }
    for t in 1..t_len {
        // Best word exit at t−1 feeds every entry state. Lower state
        // index wins ties, which matches the scan order with strict >.
        let mut best_exit = NEG_INF;
        let mut best_exit_state = usize::MAX;
        for (s, st) in states.iter().enumerate() {
            if st.last_of_word && delta[s] != NEG_INF {
                let v = delta[s] + st.log_next;
                if v > best_exit {
                    best_exit = v;
                    best_exit_state = s;
                }
            }
        }
        let mut next = vec![NEG_INF; n];
        for (s, st) in states.iter().enumerate() {
            let mut best = if delta[s] == NEG_INF { NEG_INF } else { delta[s] + st.log_self };
            let mut from = s;
            let mut via_entry = false;
            if st.state_idx == 0 {
                if best_exit_state != usize::MAX {
                    let v = best_exit + entry_penalty;
                    if v >= best {
                        best = v;
                        from = best_exit_state;
                        via_entry = true;
                    }
                }
            } else if delta[s - 1] != NEG_INF {
                let v = delta[s - 1] + states[s - 1].log_next;
                if v >= best {
                    best = v;
                    from = s - 1;
                }
            }
            if best == NEG_INF {
                continue;
            }
            next[s] = best + st.emit.log_pdf(obs.row(t))?;
            prev_state[t * n + s] = from;
            entered[t * n + s] = via_entry;
        }
        delta = next;
    }

    let mut best_final = NEG_INF;
    let mut best_state = usize::MAX;
    for (s, st) in states.iter().enumerate() {
        if st.last_of_word && delta[s] != NEG_INF {
            let v = delta[s] + st.log_next;
            if v > best_final {
                best_final = v;
                best_state = s;
            }
        }
    }
    if best_state == usize::MAX {
        return Err(Error::NoPath(format!("no word sequence fits {t_len} frames")));
    }

    let mut state_path = vec![0usize; t_len];
    let mut is_entry = vec![false; t_len];
    let mut s = best_state;
    for t in (0..t_len).rev() {
        state_path[t] = s;
        is_entry[t] = entered[t * n + s];
        if t > 0 {
            s = prev_state[t * n + s];
        }
    }
    let mut words = Vec::new();
    let mut path = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let st = &states[state_path[t]];
        if is_entry[t] {
            words.push(lexicon[st.word].clone());
        }
        path.push((words.len() - 1, st.state_idx));
    }
    Ok(DecodeResult {
        phrase_index: None,
        words,
        log_score: best_final,
        alignment: Alignment { path },
    })
}
