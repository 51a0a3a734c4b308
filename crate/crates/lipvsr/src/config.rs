//! Pipeline configuration: a TOML file with one section per stage.
//! Unknown keys are rejected; missing keys take the defaults below.
//! Every stage artifact records the SHA-256 of the resolved config so
//! incompatible artifacts cannot be mixed silently.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataio::View;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub pcanet: PcanetSection,
    pub lstm: LstmSection,
    pub tandem: TandemSection,
    pub hmm: HmmSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcanetSection {
    /// Square patch side (odd).
    pub patch_side: usize,
    /// Eigenfilters per stage; 8 yields 256-bin hash histograms.
    pub filters: usize,
    /// Max-pool window and stride over hash images.
    pub pool_window: usize,
    /// Histogram block grid (blocks x blocks per hash image).
    pub blocks: usize,
    /// Cap on frames fed to filter learning; extraction uses all frames.
    pub frame_cap: usize,
    /// Per-frame mean/variance normalization before patching.
    pub normalize: bool,
}

impl Default for PcanetSection {
    fn default() -> Self {
        PcanetSection {
            patch_side: 7,
            filters: 8,
            pool_window: 2,
            blocks: 4,
            frame_cap: 500,
            normalize: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LstmSection {
    pub hidden: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    /// Utterance presentations (one utterance per update).
    pub iterations: usize,
    pub seed: u64,
    /// Multiplier applied to features before the LSTM; the default
    /// normalizes each hash image's histogram mass (30x45 pixels) to 1.
    pub scaling: f64,
}

impl Default for LstmSection {
    fn default() -> Self {
        LstmSection {
            hidden: 64,
            lr: 0.5,
            weight_decay: 0.001,
            momentum: 0.8,
            iterations: 10_000,
            seed: 0,
            scaling: 1.0 / 1350.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TandemSection {
    /// Posterior floor before the log.
    pub floor: f64,
    /// Regression window for delta/acceleration coefficients.
    pub delta_window: usize,
    /// View degrees fused by the `fuse` stage, in concatenation order.
    pub views: Vec<u32>,
}

impl Default for TandemSection {
    fn default() -> Self {
        TandemSection { floor: 1e-8, delta_window: 2, views: vec![0, 30] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HmmSection {
    pub states_per_word: usize,
    /// Final GMM components per state; ignored when `schedule` is given.
    pub max_mixtures: usize,
    /// Explicit mixture-splitting schedule; empty derives 1,2,4,...,max.
    pub schedule: Vec<usize>,
    pub variance_floor_ratio: f64,
    /// Re-estimation passes after each mixture split.
    pub em_iters: usize,
}

impl Default for HmmSection {
    fn default() -> Self {
        HmmSection {
            states_per_word: 4,
            max_mixtures: 15,
            schedule: Vec::new(),
            variance_floor_ratio: 1e-4,
            em_iters: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    /// Default corpus root for stages that omit explicit manifest paths.
    pub corpus: String,
    /// Default work root for stage artifacts.
    pub work: String,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection { corpus: "corpus".into(), work: "work".into() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {path}: {what}")]
    Read { path: String, what: String },
    #[error("config: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    /// Loads and validates a TOML config; `None` yields the defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = match path {
            None => PipelineConfig::default(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| ConfigError::Read { path: p.display().to_string(), what: e.to_string() })?;
                toml::from_str(&text).map_err(|e| {
                    // Single-line message; the Display form spans several lines.
                    let what = match e.span() {
                        Some(s) => {
                            let line = 1 + text[..s.start.min(text.len())].matches('\n').count();
                            format!("line {line}: {}", e.message())
                        }
                        None => e.message().to_string(),
                    };
                    ConfigError::Read { path: p.display().to_string(), what }
                })?
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |what: String| Err(ConfigError::Invalid(what));
        if self.pcanet.patch_side < 3 || self.pcanet.patch_side % 2 == 0 {
            return bad(format!("pcanet.patch_side must be odd and >= 3, got {}", self.pcanet.patch_side));
        }
        if self.pcanet.filters == 0 || self.pcanet.filters > 16 {
            return bad(format!("pcanet.filters must be in 1..=16, got {}", self.pcanet.filters));
        }
        if self.pcanet.pool_window == 0 || self.pcanet.blocks == 0 || self.pcanet.frame_cap == 0 {
            return bad("pcanet.pool_window, blocks, and frame_cap must be positive".into());
        }
        if self.lstm.hidden == 0 || self.lstm.iterations == 0 {
            return bad("lstm.hidden and lstm.iterations must be positive".into());
        }
        if !(self.lstm.scaling > 0.0) || !(self.lstm.lr > 0.0) {
            return bad("lstm.scaling and lstm.lr must be positive".into());
        }
        if !(self.tandem.floor > 0.0) {
            return bad(format!("tandem.floor must be positive, got {}", self.tandem.floor));
        }
        if self.tandem.delta_window == 0 {
            return bad("tandem.delta_window must be positive".into());
        }
        if self.tandem.views.is_empty() {
            return bad("tandem.views must list at least one view".into());
        }
        for &v in &self.tandem.views {
            if View::parse(&v.to_string()).is_none() {
                return bad(format!("tandem.views: unknown view {v} (expected 0/30/45/60/90)"));
            }
        }
        if self.tandem.views.iter().collect::<std::collections::BTreeSet<_>>().len() != self.tandem.views.len() {
            return bad("tandem.views must be distinct".into());
        }
        if self.hmm.states_per_word == 0 || self.hmm.max_mixtures == 0 || self.hmm.em_iters == 0 {
            return bad("hmm.states_per_word, max_mixtures, and em_iters must be positive".into());
        }
        if !(self.hmm.variance_floor_ratio > 0.0) {
            return bad("hmm.variance_floor_ratio must be positive".into());
        }
        let schedule = self.mixture_schedule();
        if schedule.first() != Some(&1) || schedule.windows(2).any(|w| w[1] <= w[0]) {
            return bad(format!("hmm.schedule must start at 1 and increase, got {schedule:?}"));
        }
        Ok(())
    }

    /// Explicit schedule if configured, else doubling up to max_mixtures.
    pub fn mixture_schedule(&self) -> Vec<usize> {
        if self.hmm.schedule.is_empty() {
            lipvsr_core::gmmhmm::mixture_schedule(self.hmm.max_mixtures)
        } else {
            self.hmm.schedule.clone()
        }
    }

    /// Fused-view order as parsed views.
    pub fn fuse_views(&self) -> Vec<View> {
        self.tandem.views.iter().map(|v| View::parse(&v.to_string()).expect("validated")).collect()
    }

    /// Canonical serialization; field order is fixed by the structs.
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.resolved_toml().as_bytes());
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}
