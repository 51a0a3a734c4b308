//! The staged pipeline behind the CLI. Every stage writes artifacts
//! tagged with the config hash, reuses matching outputs, and refuses
//! mismatched upstream artifacts unless forced.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lipvsr_core::gmmhmm::{embedded_train, viterbi_decode, Grammar, GrammarMode, HmmTrainConfig};
use lipvsr_core::image::{normalize_mean_variance, GrayImage};
use lipvsr_core::lstm::{self, LstmParams, SparseSeq, TrainConfig};
use lipvsr_core::pcanet::{
    extract_feature, extract_patches, learn_filters_from_scatter, stage_forward, PatchMode,
    PatchScatter, PcanetConfig,
};
use lipvsr_core::scoring::{
    accuracy, align_words, correctness, frame_accuracy, render_csv, render_text,
    sentence_correctness, summarize, AlignmentCounts, SpeakerResult, VisemeMap,
};
use lipvsr_core::tandem;
use lipvsr_core::Mat;
use rayon::prelude::*;

use crate::artifacts::{self, DirMeta};
use crate::config::PipelineConfig;
use crate::dataio::{self, DataError, Utterance, View, N_CLASSES};

// ------------------------------------------------------------- errors

/// Stage failure with a machine-parsable category; the CLI prints it
/// as a single `error: <category>: <message>` line.
#[derive(Debug)]
pub struct StageError {
    pub category: &'static str,
    pub message: String,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.category, self.message)
    }
}

impl std::error::Error for StageError {}

impl From<DataError> for StageError {
    fn from(e: DataError) -> Self {
        StageError { category: e.category(), message: e.to_string() }
    }
}

impl From<lipvsr_core::Error> for StageError {
    fn from(e: lipvsr_core::Error) -> Self {
        StageError { category: "data", message: e.to_string() }
    }
}

impl From<crate::config::ConfigError> for StageError {
    fn from(e: crate::config::ConfigError) -> Self {
        let s = e.to_string();
        let message = s.strip_prefix("config: ").unwrap_or(&s).to_string();
        StageError { category: "config", message }
    }
}

fn io_stage(path: &Path, e: std::io::Error) -> StageError {
    StageError { category: "io", message: format!("{}: {e}", path.display()) }
}

fn missing(path: &Path, rerun: &str) -> StageError {
    StageError {
        category: "missing",
        message: format!("{}: missing artifact; run {rerun}", path.display()),
    }
}

fn stale(what: &Path, found: &str, current: &str, rerun: &str) -> StageError {
    StageError {
        category: "stale",
        message: format!(
            "{}: produced under config hash {}.. but current config is {}..; re-run {rerun} or pass --force",
            what.display(),
            &found[..found.len().min(12)],
            &current[..current.len().min(12)],
        ),
    }
}

pub type Result<T> = std::result::Result<T, StageError>;

// ----------------------------------------------------------- context

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Computed,
    Cached,
}

/// Shared state of one CLI invocation: resolved config, its hash, the
/// work root, and the force flag.
pub struct StageCtx {
    pub cfg: PipelineConfig,
    pub hash: String,
    pub work: PathBuf,
    pub force: bool,
}

impl StageCtx {
    pub fn new(cfg: PipelineConfig, work: PathBuf, force: bool) -> Self {
        let hash = cfg.hash();
        StageCtx { cfg, hash, work, force }
    }

    /// Creates the work root, records the resolved config there, and
    /// takes the per-directory lock.
    pub fn prepare(&self) -> Result<LockGuard> {
        fs::create_dir_all(&self.work).map_err(|e| io_stage(&self.work, e))?;
        let lock = LockGuard::acquire(&self.work)?;
        let resolved = self.work.join("config.resolved.toml");
        fs::write(&resolved, self.cfg.resolved_toml()).map_err(|e| io_stage(&resolved, e))?;
        Ok(lock)
    }

    pub fn bank_path(&self, view: View) -> PathBuf {
        self.work.join("models").join(format!("bank_{}.bin", view.tag()))
    }

    pub fn lstm_path(&self, view: View) -> PathBuf {
        self.work.join("models").join(format!("lstm_{}.bin", view.tag()))
    }

    pub fn hmm_path(&self, tag: &str) -> PathBuf {
        self.work.join("models").join(format!("hmms_{tag}.bin"))
    }

    pub fn features_dir(&self, view: View) -> PathBuf {
        self.work.join("features").join(view.tag())
    }

    pub fn posteriors_dir(&self, view: View) -> PathBuf {
        self.work.join("posteriors").join(view.tag())
    }

    pub fn tandem_dir(&self, tag: &str) -> PathBuf {
        self.work.join("tandem").join(tag)
    }

    pub fn hyp_path(&self, tag: &str) -> PathBuf {
        self.work.join("decode").join(format!("{tag}.hyp"))
    }

    pub fn report_path(&self, tag: &str, ext: &str) -> PathBuf {
        self.work.join("reports").join(format!("{tag}.{ext}"))
    }

    fn pcanet_config(&self) -> PcanetConfig {
        PcanetConfig {
            patch_side: self.cfg.pcanet.patch_side,
            filters_per_stage: self.cfg.pcanet.filters,
            pool_window: self.cfg.pcanet.pool_window,
            pool_stride: self.cfg.pcanet.pool_window,
            block_grid: self.cfg.pcanet.blocks,
            bins: 1usize << self.cfg.pcanet.filters,
        }
    }

    /// Checks a model artifact against the current config hash.
    /// Returns true when it exists and matches (reusable).
    fn model_current(&self, path: &Path, kind: &str, rerun: &str) -> Result<bool> {
        if !path.exists() {
            return Ok(false);
        }
        let found = artifacts::artifact_hash(path, kind)?;
        if found == self.hash || self.force {
            return Ok(true);
        }
        Err(stale(path, &found, &self.hash, rerun))
    }

    /// Validates an upstream model artifact, failing when absent.
    fn require_model(&self, path: &Path, kind: &str, producer: &str) -> Result<()> {
        if !path.exists() {
            return Err(match kind {
                "hmm_set" => StageError {
                    category: "missing",
                    message: format!("{}: missing model set; run {producer}", path.display()),
                },
                _ => missing(path, producer),
            });
        }
        let found = artifacts::artifact_hash(path, kind)?;
        if found != self.hash && !self.force {
            return Err(stale(path, &found, &self.hash, producer));
        }
        Ok(())
    }

    /// Validates an upstream stage directory via its meta sidecar.
    fn require_dir(&self, dir: &Path, stage: &str, producer: &str) -> Result<DirMeta> {
        let meta = artifacts::read_meta(dir)?.ok_or_else(|| missing(&artifacts::meta_path(dir), producer))?;
        if meta.stage != stage {
            return Err(StageError {
                category: "missing",
                message: format!(
                    "{}: produced by stage {} but {stage} output expected; run {producer}",
                    dir.display(),
                    meta.stage
                ),
            });
        }
        if meta.config_hash != self.hash && !self.force {
            return Err(stale(dir, &meta.config_hash, &self.hash, producer));
        }
        Ok(meta)
    }

    /// True when an output directory already holds current results for
    /// all expected files.
    fn dir_current(&self, dir: &Path, stage: &str, files: &[String]) -> Result<bool> {
        if self.force {
            return Ok(false);
        }
        match artifacts::read_meta(dir)? {
            Some(meta) if meta.stage == stage && meta.config_hash == self.hash => {
                Ok(files.iter().all(|f| dir.join(f).exists()))
            }
            _ => Ok(false),
        }
    }
}

/// Exclusive per-work-directory lock; one stage at a time.
pub struct LockGuard {
    path: PathBuf,
}

impl LockGuard {
    fn acquire(work: &Path) -> Result<LockGuard> {
        let path = work.join(".lock");
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(StageError {
                category: "lock",
                message: format!(
                    "{}: another stage holds the lock (delete the file if it is stale)",
                    path.display()
                ),
            }),
            Err(e) => Err(io_stage(&path, e)),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

// ------------------------------------------------------------ loading

/// Loads manifests and keeps utterances of one view, erroring when a
/// manifest contributes nothing for it.
fn load_view(manifests: &[PathBuf], view: View) -> Result<Vec<Utterance>> {
    let mut out = Vec::new();
    for path in manifests {
        let utts = dataio::load_manifest(path, N_CLASSES)?;
        let before = out.len();
        out.extend(utts.into_iter().filter(|u| u.view == view));
        if out.len() == before {
            return Err(StageError {
                category: "data",
                message: format!("{}: no utterances for view {view}", path.display()),
            });
        }
    }
    Ok(out)
}

/// Unique utterance ids in first-appearance order with transcripts,
/// verifying that views agree on the transcript.
fn unique_ids(manifests: &[PathBuf]) -> Result<Vec<(String, Vec<String>)>> {
    let mut order = Vec::new();
    let mut seen: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for path in manifests {
        for u in dataio::load_manifest(path, N_CLASSES)? {
            match seen.get(&u.id) {
                None => {
                    seen.insert(u.id.clone(), u.transcript.clone());
                    order.push((u.id, u.transcript));
                }
                Some(t) if *t != u.transcript => {
                    return Err(StageError {
                        category: "data",
                        message: format!("utterance {}: transcripts differ between views", u.id),
                    });
                }
                Some(_) => {}
            }
        }
    }
    Ok(order)
}

fn load_frames(u: &Utterance, normalize: bool) -> Result<Vec<GrayImage>> {
    let mut frames = Vec::with_capacity(u.n_frames());
    for path in &u.frame_paths {
        let img = dataio::load_image(path)?;
        frames.push(if normalize { normalize_mean_variance(&img) } else { img });
    }
    if let Some(first) = frames.first() {
        for (i, f) in frames.iter().enumerate() {
            if (f.width, f.height) != (first.width, first.height) {
                return Err(StageError {
                    category: "data",
                    message: format!(
                        "utterance {}: frame {} is {}x{} but frame 1 is {}x{}",
                        u.id,
                        i + 1,
                        f.width,
                        f.height,
                        first.width,
                        first.height
                    ),
                });
            }
        }
    }
    Ok(frames)
}

fn feat_name(id: &str) -> String {
    format!("{id}.feat")
}

// ------------------------------------------------------ learn-filters

/// Learns both eigenfilter banks from up to `frame_cap` training
/// frames and stores them as one artifact.
pub fn learn_filters(ctx: &StageCtx, manifests: &[PathBuf], view: View) -> Result<Outcome> {
    let bank_path = ctx.bank_path(view);
    if ctx.model_current(&bank_path, "filter_bank", "learn-filters")? {
        println!("learn-filters {}: cached", view.tag());
        return Ok(Outcome::Cached);
    }
    let start = Instant::now();
    let utts = load_view(manifests, view)?;
    let k = ctx.cfg.pcanet.patch_side;
    let l = ctx.cfg.pcanet.filters;

    // Round-robin over utterances so the cap does not starve later speakers.
    let mut picked: Vec<&Path> = Vec::with_capacity(ctx.cfg.pcanet.frame_cap);
    let mut depth = 0;
    while picked.len() < ctx.cfg.pcanet.frame_cap {
        let mut any = false;
        for u in &utts {
            if let Some(p) = u.frame_paths.get(depth) {
                picked.push(p);
                any = true;
                if picked.len() == ctx.cfg.pcanet.frame_cap {
                    break;
                }
            }
        }
        if !any {
            break;
        }
        depth += 1;
    }

    let normalize = ctx.cfg.pcanet.normalize;
    let frames: Vec<GrayImage> = picked
        .par_iter()
        .map(|p| {
            let img = dataio::load_image(p)?;
            Ok(if normalize { normalize_mean_variance(&img) } else { img })
        })
        .collect::<Result<_>>()?;

    let scatters: Vec<PatchScatter> = frames
        .par_iter()
        .map(|img| {
            let mut s = PatchScatter::new(k * k);
            s.add_patches(&extract_patches(img, k, PatchMode::Valid)?)?;
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut scatter1 = PatchScatter::new(k * k);
    for s in &scatters {
        scatter1.merge(s);
    }
    let bank1 = learn_filters_from_scatter(&scatter1, l, 1)?;

    let scatters: Vec<PatchScatter> = frames
        .par_iter()
        .map(|img| {
            let mut s = PatchScatter::new(k * k);
            for map in stage_forward(img, &bank1)? {
                s.add_patches(&extract_patches(&map, k, PatchMode::Valid)?)?;
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    let mut scatter2 = PatchScatter::new(k * k);
    for s in &scatters {
        scatter2.merge(s);
    }
    let bank2 = learn_filters_from_scatter(&scatter2, l, 2)?;

    fs::create_dir_all(bank_path.parent().unwrap()).map_err(|e| io_stage(&bank_path, e))?;
    artifacts::save_banks(&bank_path, &ctx.hash, &bank1, &bank2)?;
    println!(
        "learn-filters {}: {l}+{l} filters from {} frames ({} patches/stage) in {:.1}s",
        view.tag(),
        frames.len(),
        scatter1.count(),
        start.elapsed().as_secs_f64()
    );
    Ok(Outcome::Computed)
}

// ------------------------------------------------------------ extract

/// Extracts per-frame features for every utterance of the view into
/// `features/<view>/<id>.feat`.
pub fn extract(ctx: &StageCtx, manifests: &[PathBuf], view: View) -> Result<Outcome> {
    let bank_path = ctx.bank_path(view);
    ctx.require_model(&bank_path, "filter_bank", "learn-filters")?;
    let (_, bank1, bank2) = artifacts::load_banks(&bank_path)?;
    let pcfg = ctx.pcanet_config();
    pcfg.validate()?;

    let utts = load_view(manifests, view)?;
    let out_dir = ctx.features_dir(view);
    let expected: Vec<String> = utts.iter().map(|u| feat_name(&u.id)).collect();
    if ctx.dir_current(&out_dir, "extract", &expected)? {
        println!("extract {}: cached ({} utterances)", view.tag(), utts.len());
        return Ok(Outcome::Cached);
    }
    let start = Instant::now();
    fs::create_dir_all(&out_dir).map_err(|e| io_stage(&out_dir, e))?;

    let normalize = ctx.cfg.pcanet.normalize;
    let n_frames: usize = utts
        .par_iter()
        .map(|u| {
            let frames = load_frames(u, normalize)?;
            let mut rows = Mat::zeros(frames.len(), pcfg.feature_len());
            for (t, frame) in frames.iter().enumerate() {
                let feat = extract_feature(frame, &bank1, &bank2, &pcfg)?;
                rows.row_mut(t).copy_from_slice(&feat);
            }
            dataio::write_features(&out_dir.join(feat_name(&u.id)), &rows)?;
            Ok(frames.len())
        })
        .sum::<Result<usize>>()?;

    artifacts::write_meta(
        &out_dir,
        &DirMeta {
            stage: "extract".into(),
            config_hash: ctx.hash.clone(),
            tag: view.tag(),
            dim: pcfg.feature_len(),
        },
    )?;
    let dt = start.elapsed().as_secs_f64();
    println!(
        "extract {}: {} utterances, {n_frames} frames, dim {} in {dt:.1}s ({:.1} ms/frame)",
        view.tag(),
        utts.len(),
        pcfg.feature_len(),
        1e3 * dt / n_frames as f64
    );
    Ok(Outcome::Computed)
}

// --------------------------------------------------------- train-lstm

fn sparse_dataset(
    ctx: &StageCtx,
    utts: &[Utterance],
    view: View,
    need_labels: bool,
) -> Result<Vec<(SparseSeq, Vec<usize>)>> {
    let dir = ctx.features_dir(view);
    let scale = ctx.cfg.lstm.scaling;
    utts.par_iter()
        .map(|u| {
            let path = dir.join(feat_name(&u.id));
            if !path.exists() {
                return Err(missing(&path, "extract"));
            }
            let feats = dataio::read_features(&path)?;
            let labels = match (&u.frame_labels, need_labels) {
                (Some(l), _) => l.clone(),
                (None, false) => Vec::new(),
                (None, true) => {
                    return Err(StageError {
                        category: "data",
                        message: format!("utterance {}: manifest provides no frame labels", u.id),
                    })
                }
            };
            if need_labels && labels.len() != feats.rows() {
                return Err(StageError {
                    category: "data",
                    message: format!(
                        "utterance {}: {} labels for {} feature frames",
                        u.id,
                        labels.len(),
                        feats.rows()
                    ),
                });
            }
            Ok((SparseSeq::from_dense_scaled(&feats, scale), labels))
        })
        .collect()
}

/// Trains the frame classifier on one view's features.
pub fn train_lstm(ctx: &StageCtx, manifests: &[PathBuf], view: View) -> Result<Outcome> {
    let model_path = ctx.lstm_path(view);
    if ctx.model_current(&model_path, "lstm", "train-lstm")? {
        println!("train-lstm {}: cached", view.tag());
        return Ok(Outcome::Cached);
    }
    let meta = ctx.require_dir(&ctx.features_dir(view), "extract", "extract")?;
    let start = Instant::now();
    let utts = load_view(manifests, view)?;
    let dataset = sparse_dataset(ctx, &utts, view, true)?;

    let lcfg = &ctx.cfg.lstm;
    let params = LstmParams::init(meta.dim, lcfg.hidden, N_CLASSES, lcfg.seed);
    let train_cfg = TrainConfig {
        learning_rate: lcfg.lr,
        weight_decay: lcfg.weight_decay,
        momentum: lcfg.momentum,
        max_iterations: lcfg.iterations,
        bptt_horizon: None,
        seed: lcfg.seed,
    };
    let (params, trace) = lstm::train(params, &dataset, &train_cfg)?;
    let acc = lstm::frame_accuracy(&params, &dataset)?;

    fs::create_dir_all(model_path.parent().unwrap()).map_err(|e| io_stage(&model_path, e))?;
    artifacts::save_lstm(&model_path, &ctx.hash, &params)?;
    println!(
        "train-lstm {}: {} iterations over {} utterances, loss {:.4} -> {:.4}, train frame accuracy {:.1}% in {:.1}s",
        view.tag(),
        trace.len(),
        dataset.len(),
        trace.first().copied().unwrap_or(f64::NAN),
        trace.last().copied().unwrap_or(f64::NAN),
        100.0 * acc,
        start.elapsed().as_secs_f64()
    );
    Ok(Outcome::Computed)
}

// --------------------------------------------------------- posteriors

/// Runs the trained classifier over every utterance of the view and
/// stores per-frame class posteriors.
pub fn posteriors(ctx: &StageCtx, manifests: &[PathBuf], view: View) -> Result<Outcome> {
    let model_path = ctx.lstm_path(view);
    ctx.require_model(&model_path, "lstm", "train-lstm")?;
    ctx.require_dir(&ctx.features_dir(view), "extract", "extract")?;
    let (_, params) = artifacts::load_lstm(&model_path)?;

    let utts = load_view(manifests, view)?;
    let out_dir = ctx.posteriors_dir(view);
    let expected: Vec<String> = utts.iter().map(|u| feat_name(&u.id)).collect();
    if ctx.dir_current(&out_dir, "posteriors", &expected)? {
        println!("posteriors {}: cached ({} utterances)", view.tag(), utts.len());
        return Ok(Outcome::Cached);
    }
    let start = Instant::now();
    fs::create_dir_all(&out_dir).map_err(|e| io_stage(&out_dir, e))?;

    let dataset = sparse_dataset(ctx, &utts, view, false)?;
    utts.par_iter()
        .zip(&dataset)
        .try_for_each(|(u, (seq, _))| -> Result<()> {
            let (post, _) = lstm::forward(&params, seq)?;
            dataio::write_features(&out_dir.join(feat_name(&u.id)), &post)?;
            Ok(())
        })?;

    artifacts::write_meta(
        &out_dir,
        &DirMeta {
            stage: "posteriors".into(),
            config_hash: ctx.hash.clone(),
            tag: view.tag(),
            dim: N_CLASSES,
        },
    )?;
    println!(
        "posteriors {}: {} utterances in {:.1}s",
        view.tag(),
        utts.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(Outcome::Computed)
}

// ------------------------------------------------------------- tandem

/// Converts single-view posteriors into log/delta/acceleration
/// observation vectors.
pub fn tandem_stage(ctx: &StageCtx, manifests: &[PathBuf], view: View) -> Result<Outcome> {
    let post_dir = ctx.posteriors_dir(view);
    ctx.require_dir(&post_dir, "posteriors", "posteriors")?;

    let utts = load_view(manifests, view)?;
    let out_dir = ctx.tandem_dir(&view.tag());
    let expected: Vec<String> = utts.iter().map(|u| feat_name(&u.id)).collect();
    if ctx.dir_current(&out_dir, "tandem", &expected)? {
        println!("tandem {}: cached ({} utterances)", view.tag(), utts.len());
        return Ok(Outcome::Cached);
    }
    fs::create_dir_all(&out_dir).map_err(|e| io_stage(&out_dir, e))?;

    let (floor, window) = (ctx.cfg.tandem.floor, ctx.cfg.tandem.delta_window);
    utts.par_iter().try_for_each(|u| -> Result<()> {
        let path = post_dir.join(feat_name(&u.id));
        if !path.exists() {
            return Err(missing(&path, "posteriors"));
        }
        let post = dataio::read_features(&path)?;
        let feats = tandem::assemble(&post, floor, window)?;
        dataio::write_features(&out_dir.join(feat_name(&u.id)), &feats)?;
        Ok(())
    })?;

    artifacts::write_meta(
        &out_dir,
        &DirMeta {
            stage: "tandem".into(),
            config_hash: ctx.hash.clone(),
            tag: view.tag(),
            dim: 3 * N_CLASSES,
        },
    )?;
    println!("tandem {}: {} utterances, dim {}", view.tag(), utts.len(), 3 * N_CLASSES);
    Ok(Outcome::Computed)
}

/// Concatenates per-view posteriors at the log level (view order from
/// the config), then applies one delta/acceleration pass.
pub fn fuse_stage(ctx: &StageCtx, manifests: &[PathBuf]) -> Result<Outcome> {
    let views = ctx.cfg.fuse_views();
    for &view in &views {
        ctx.require_dir(&ctx.posteriors_dir(view), "posteriors", "posteriors")?;
    }
    let ids = unique_ids(manifests)?;
    let out_dir = ctx.tandem_dir("fused");
    let expected: Vec<String> = ids.iter().map(|(id, _)| feat_name(id)).collect();
    if ctx.dir_current(&out_dir, "tandem", &expected)? {
        println!("fuse: cached ({} utterances)", ids.len());
        return Ok(Outcome::Cached);
    }
    fs::create_dir_all(&out_dir).map_err(|e| io_stage(&out_dir, e))?;

    let (floor, window) = (ctx.cfg.tandem.floor, ctx.cfg.tandem.delta_window);
    ids.par_iter().try_for_each(|(id, _)| -> Result<()> {
        let mut mats = Vec::with_capacity(views.len());
        for &view in &views {
            let path = ctx.posteriors_dir(view).join(feat_name(id));
            if !path.exists() {
                return Err(StageError {
                    category: "missing",
                    message: format!(
                        "utterance {id}: no posteriors for view {view}; run posteriors --view {view}"
                    ),
                });
            }
            mats.push(dataio::read_features(&path)?);
        }
        let refs: Vec<&Mat> = mats.iter().collect();
        let fused = tandem::concat_views(&refs, floor, window).map_err(|e| StageError {
            category: "data",
            message: format!("utterance {id}: {e}"),
        })?;
        dataio::write_features(&out_dir.join(feat_name(id)), &fused)?;
        Ok(())
    })?;

    artifacts::write_meta(
        &out_dir,
        &DirMeta {
            stage: "tandem".into(),
            config_hash: ctx.hash.clone(),
            tag: "fused".into(),
            dim: 3 * N_CLASSES * views.len(),
        },
    )?;
    println!(
        "fuse: {} utterances over views {:?}, dim {}",
        ids.len(),
        views.iter().map(|v| v.label()).collect::<Vec<_>>(),
        3 * N_CLASSES * views.len()
    );
    Ok(Outcome::Computed)
}

// ---------------------------------------------------------- train-hmm

fn tandem_observations(
    ctx: &StageCtx,
    tag: &str,
    ids: &[(String, Vec<String>)],
) -> Result<Vec<(Vec<String>, Mat)>> {
    let dir = ctx.tandem_dir(tag);
    ids.par_iter()
        .map(|(id, transcript)| {
            let path = dir.join(feat_name(id));
            if !path.exists() {
                return Err(missing(&path, "tandem (or fuse)"));
            }
            Ok((transcript.clone(), dataio::read_features(&path)?))
        })
        .collect()
}

/// Embedded training of word models on tandem features.
pub fn train_hmm(ctx: &StageCtx, manifests: &[PathBuf], tag: &str) -> Result<Outcome> {
    let model_path = ctx.hmm_path(tag);
    if ctx.model_current(&model_path, "hmm_set", "train-hmm")? {
        println!("train-hmm {tag}: cached");
        return Ok(Outcome::Cached);
    }
    let meta = ctx.require_dir(&ctx.tandem_dir(tag), "tandem", "tandem (or fuse)")?;
    let start = Instant::now();
    let ids = unique_ids(manifests)?;
    let utterances = tandem_observations(ctx, tag, &ids)?;

    let hcfg = HmmTrainConfig {
        states_per_word: ctx.cfg.hmm.states_per_word,
        schedule: ctx.cfg.mixture_schedule(),
        variance_floor_ratio: ctx.cfg.hmm.variance_floor_ratio,
        passes_per_split: ctx.cfg.hmm.em_iters,
        ..HmmTrainConfig::default()
    };
    let (models, report) = embedded_train(&utterances, &hcfg)?;
    for w in &report.warnings {
        eprintln!("warning: train-hmm {tag}: {w}");
    }

    fs::create_dir_all(model_path.parent().unwrap()).map_err(|e| io_stage(&model_path, e))?;
    artifacts::save_models(&model_path, &ctx.hash, &models, meta.dim)?;
    let report_path = ctx.work.join("models").join(format!("hmms_{tag}_report.csv"));
    fs::write(&report_path, report.to_csv()).map_err(|e| io_stage(&report_path, e))?;
    println!(
        "train-hmm {tag}: {} words, {} states/word, mixtures {:?}, {} utterances in {:.1}s",
        models.words().len(),
        ctx.cfg.hmm.states_per_word,
        ctx.cfg.mixture_schedule(),
        utterances.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(Outcome::Computed)
}

// --------------------------------------------------------------- decode

/// Grammar selection for decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecodeMode {
    Phrases,
    Words,
}

/// Decodes every test utterance against the phrase list (or a word
/// loop) and writes `id<TAB>words` hypotheses.
pub fn decode_stage(
    ctx: &StageCtx,
    manifests: &[PathBuf],
    tag: &str,
    grammar_path: Option<&Path>,
    mode: DecodeMode,
) -> Result<Outcome> {
    let model_path = ctx.hmm_path(tag);
    ctx.require_model(&model_path, "hmm_set", "train-hmm")?;
    ctx.require_dir(&ctx.tandem_dir(tag), "tandem", "tandem (or fuse)")?;
    let (_, models, _) = artifacts::load_models(&model_path)?;

    let grammar = match mode {
        DecodeMode::Phrases => {
            let path = grammar_path.ok_or_else(|| StageError {
                category: "args",
                message: "phrase decoding needs --grammar <phrases file>".into(),
            })?;
            Grammar::phrase_list(dataio::load_phrases(path)?)?
        }
        DecodeMode::Words => {
            let lexicon = models.words().iter().map(|w| w.word().to_string()).collect();
            Grammar::word_loop(lexicon)?
        }
    };
    debug_assert!(matches!(
        (mode, grammar.mode()),
        (DecodeMode::Phrases, GrammarMode::PhraseList) | (DecodeMode::Words, GrammarMode::WordLoop)
    ));

    let start = Instant::now();
    let ids = unique_ids(manifests)?;
    let observations = tandem_observations(ctx, tag, &ids)?;
    let hyps: Vec<(String, Vec<String>)> = ids
        .par_iter()
        .zip(&observations)
        .map(|((id, _), (_, obs))| {
            let result = viterbi_decode(&models, &grammar, obs).map_err(|e| StageError {
                category: "data",
                message: format!("utterance {id}: {e}"),
            })?;
            Ok((id.clone(), result.words))
        })
        .collect::<Result<_>>()?;

    let hyp_path = ctx.hyp_path(tag);
    fs::create_dir_all(hyp_path.parent().unwrap()).map_err(|e| io_stage(&hyp_path, e))?;
    dataio::write_hypotheses(&hyp_path, &hyps)?;
    println!(
        "decode {tag}: {} utterances in {:.1}s -> {}",
        hyps.len(),
        start.elapsed().as_secs_f64(),
        hyp_path.display()
    );
    Ok(Outcome::Computed)
}

// ---------------------------------------------------------------- score

/// Scoring output: the CSV report plus optional frame accuracies.
#[derive(Debug, Clone)]
pub struct ScoreOutput {
    pub csv: String,
    pub text: String,
    /// (phoneme %, viseme %) when frame scoring was requested.
    pub frame_accuracy: Option<(f64, f64)>,
}

/// Scores hypotheses against manifest transcripts, optionally also
/// computing per-frame phoneme/viseme accuracy from stored posteriors.
#[allow(clippy::too_many_arguments)]
pub fn score_stage(
    ctx: &StageCtx,
    manifests: &[PathBuf],
    tag: &str,
    view_filter: Option<View>,
    view_label: Option<String>,
    frame_view: Option<View>,
    viseme_path: Option<&Path>,
) -> Result<ScoreOutput> {
    let hyp_path = ctx.hyp_path(tag);
    if !hyp_path.exists() {
        return Err(missing(&hyp_path, "decode"));
    }
    let hyps: BTreeMap<String, Vec<String>> = dataio::load_hypotheses(&hyp_path)?.into_iter().collect();

    let mut utts = Vec::new();
    let mut seen = BTreeSet::new();
    for path in manifests {
        for u in dataio::load_manifest(path, N_CLASSES)? {
            if view_filter.is_none_or(|v| u.view == v) && seen.insert(u.id.clone()) {
                utts.push(u);
            }
        }
    }
    if utts.is_empty() {
        return Err(StageError { category: "data", message: "no utterances to score".into() });
    }

    // Group pairs per (speaker, view label).
    let mut groups: BTreeMap<(String, String), Vec<&Utterance>> = BTreeMap::new();
    for u in &utts {
        let label = view_label.clone().unwrap_or_else(|| u.view.label().to_string());
        groups.entry((u.speaker.clone(), label)).or_default().push(u);
    }

    let mut rows = Vec::new();
    for ((speaker, label), members) in &groups {
        let mut counts = AlignmentCounts::default();
        let mut pairs: Vec<(&[String], &[String])> = Vec::new();
        for u in members {
            let hyp = hyps.get(&u.id).ok_or_else(|| StageError {
                category: "data",
                message: format!("no hypothesis for utterance {}; re-run decode", u.id),
            })?;
            counts.merge(&align_words(&u.transcript, hyp));
            pairs.push((&u.transcript, hyp));
        }
        rows.push(SpeakerResult {
            speaker: speaker.clone(),
            view: label.clone(),
            sentence_correctness: sentence_correctness(&pairs)?,
            word_correctness: correctness(&counts)?,
            word_accuracy: accuracy(&counts)?,
        });
    }
    let summaries = summarize(&rows)?;
    let csv = render_csv(&rows, &summaries);
    let text = render_text(&rows, &summaries);

    fs::create_dir_all(ctx.work.join("reports")).map_err(|e| io_stage(&ctx.work.join("reports"), e))?;
    let csv_path = ctx.report_path(tag, "csv");
    fs::write(&csv_path, &csv).map_err(|e| io_stage(&csv_path, e))?;
    let text_path = ctx.report_path(tag, "txt");
    fs::write(&text_path, &text).map_err(|e| io_stage(&text_path, e))?;

    let frame_accuracy = match frame_view {
        None => None,
        Some(view) => {
            let map = match viseme_path {
                Some(p) => dataio::load_viseme_map(p, N_CLASSES)?,
                None => {
                    return Err(StageError {
                        category: "args",
                        message: "frame scoring needs --visemes <map file>".into(),
                    })
                }
            };
            Some(score_frames(ctx, &utts, view, &map, tag)?)
        }
    };

    println!("{text}");
    if let Some((p, v)) = frame_accuracy {
        println!("frame accuracy: phoneme {p:.2}%, viseme {v:.2}%");
    }
    Ok(ScoreOutput { csv, text, frame_accuracy })
}

fn score_frames(
    ctx: &StageCtx,
    utts: &[Utterance],
    view: View,
    map: &VisemeMap,
    tag: &str,
) -> Result<(f64, f64)> {
    let dir = ctx.posteriors_dir(view);
    ctx.require_dir(&dir, "posteriors", "posteriors")?;
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    for u in utts {
        let Some(frame_labels) = &u.frame_labels else {
            return Err(StageError {
                category: "data",
                message: format!("utterance {}: manifest provides no frame labels", u.id),
            });
        };
        let path = dir.join(feat_name(&u.id));
        if !path.exists() {
            return Err(missing(&path, "posteriors"));
        }
        let post = dataio::read_features(&path)?;
        if post.rows() != frame_labels.len() {
            return Err(StageError {
                category: "data",
                message: format!(
                    "utterance {}: {} posterior frames for {} labels",
                    u.id,
                    post.rows(),
                    frame_labels.len()
                ),
            });
        }
        labels.extend_from_slice(frame_labels);
        preds.extend(post.iter_rows().map(lstm::argmax));
    }
    let phoneme = frame_accuracy(&labels, &preds, None)?;
    let viseme = frame_accuracy(&labels, &preds, Some(map))?;
    let path = ctx.report_path(&format!("{tag}_frames"), "csv");
    fs::write(&path, format!("level,accuracy\nphoneme,{phoneme:.4}\nviseme,{viseme:.4}\n"))
        .map_err(|e| io_stage(&path, e))?;
    Ok((phoneme, viseme))
}
