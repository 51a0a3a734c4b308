//! Whole-word left-to-right HMMs with diagonal GMM emissions.
//!
//! Training is segmental: flat start, then repeated forced alignment
//! and re-estimation, growing mixtures by splitting. Decoding is exact
//! Viterbi over a phrase-list (or word-loop) grammar.

mod gmm;
mod hmm;
mod train;

pub use gmm::{
    em_update, gmm_em, mixture_schedule, split_mixtures, variance_floor, GaussianMixture,
    DEFAULT_VARIANCE_FLOOR_RATIO,
};
pub use hmm::{
    force_align, viterbi_decode, Alignment, DecodeResult, Grammar, GrammarMode, ModelSet, WordHmm,
};
pub use train::{embedded_train, HmmTrainConfig, TrainingReport};
