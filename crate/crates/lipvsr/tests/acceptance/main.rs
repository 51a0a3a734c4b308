//! Acceptance gate. One test per shipping criterion, each printing its
//! own pass/fail line through the harness:
//!
//!  1. feature length, histogram mass, per-frame runtime
//!  2. eigenfilter orthonormality and planted-direction recovery
//!  3. exact equality with a per-pixel feature oracle
//!  4. LSTM analytic gradients vs central differences
//!  5. GMM EM monotonicity and the K=1 closed form
//!  6. Viterbi vs exhaustive path enumeration
//!  7. word alignment vs an edit-distance oracle
//!  8. end-to-end synthetic corpus: correctness, runtime, reproducibility
//!  9. two-view fusion at least as good as the best single view
//! 10. viseme-level frame accuracy dominates phoneme-level

mod oracles;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use lipvsr_core::gmmhmm::{gmm_em, viterbi_decode, GaussianMixture, Grammar, ModelSet, WordHmm};
use lipvsr_core::image::GrayImage;
use lipvsr_core::lstm::{backward, forward, loss, LstmParams, SparseSeq};
use lipvsr_core::pcanet::{
    extract_feature, extract_patches, learn_filters, stage_forward, FilterBank, PatchMode,
    PcanetConfig,
};
use lipvsr_core::rng::rng_from_seed;
use lipvsr_core::scoring::{accuracy, align_words, correctness};
use lipvsr_core::Mat;
use rand::Rng;

fn random_image(rng: &mut impl Rng, width: usize, height: usize) -> GrayImage {
    let pixels = (0..width * height).map(|_| rng.random::<f64>()).collect();
    GrayImage::new(width, height, pixels)
}

/// Learns both filter banks from a frame set, the same route the
/// pipeline takes.
fn learn_banks(frames: &[GrayImage], cfg: &PcanetConfig) -> (FilterBank, FilterBank) {
    let k = cfg.patch_side;
    let mut stage1 = Vec::new();
    for f in frames {
        stage1.push(extract_patches(f, k, PatchMode::Valid).unwrap());
    }
    let bank1 = learn_filters(&vcat(&stage1), cfg.filters_per_stage, 1).unwrap();
    let mut stage2 = Vec::new();
    for f in frames {
        for map in stage_forward(f, &bank1).unwrap() {
            stage2.push(extract_patches(&map, k, PatchMode::Valid).unwrap());
        }
    }
    let bank2 = learn_filters(&vcat(&stage2), cfg.filters_per_stage, 2).unwrap();
    (bank1, bank2)
}

fn vcat(mats: &[Mat]) -> Mat {
    let cols = mats[0].cols();
    let mut data = Vec::new();
    let mut rows = 0;
    for m in mats {
        data.extend_from_slice(m.data());
        rows += m.rows();
    }
    Mat::from_vec(rows, cols, data)
}

// --------------------------------------------------------- criterion 1

#[test]
fn criterion_01_feature_length_mass_and_speed() {
    let cfg = PcanetConfig::default();
    assert_eq!(cfg.feature_len(), 32_768);

    let mut rng = rng_from_seed(9101);
    let train: Vec<GrayImage> = (0..3).map(|_| random_image(&mut rng, 90, 60)).collect();
    let (bank1, bank2) = learn_banks(&train, &cfg);

    // "Any" frame: noise, constants, and a smooth ramp all carry the
    // same histogram mass.
    let mut frames: Vec<GrayImage> = (0..10).map(|_| random_image(&mut rng, 90, 60)).collect();
    frames.push(GrayImage::new(90, 60, vec![0.5; 90 * 60]));
    frames.push(GrayImage::new(
        90,
        60,
        (0..90 * 60).map(|i| (i % 90) as f64 / 90.0).collect(),
    ));

    let start = Instant::now();
    for frame in &frames {
        let feat = extract_feature(frame, &bank1, &bank2, &cfg).unwrap();
        assert_eq!(feat.len(), 32_768);
        let mass: f64 = feat.iter().sum();
        assert_eq!(mass, 8.0 * 1350.0, "histogram mass must be 8 x 1350");
    }
    let per_frame = start.elapsed().as_secs_f64() / frames.len() as f64;
    assert!(
        per_frame < 0.050,
        "feature extraction took {:.1} ms/frame, budget is 50",
        per_frame * 1e3
    );
}

// --------------------------------------------------------- criterion 2

#[test]
fn criterion_02_orthonormal_filters_and_rank_one_recovery() {
    let mut rng = rng_from_seed(9202);
    let mut data = Vec::new();
    for _ in 0..600 * 49 {
        data.push(rng.random::<f64>() * 2.0 - 1.0);
    }
    let bank = learn_filters(&Mat::from_vec(600, 49, data), 8, 1).unwrap();
    for (i, fi) in bank.filters.iter().enumerate() {
        for (j, fj) in bank.filters.iter().enumerate() {
            let dot: f64 = fi.iter().zip(fj).map(|(a, b)| a * b).sum();
            let target = f64::from(u8::from(i == j));
            assert!((dot - target).abs() <= 1e-6, "gram[{i}][{j}] = {dot}");
        }
    }

    let mut v: Vec<f64> = (0..49).map(|_| rng.random::<f64>() - 0.5).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut data = Vec::new();
    for _ in 0..120 {
        let a = rng.random::<f64>() * 4.0 - 2.0;
        data.extend(v.iter().map(|&x| a * x));
    }
    let bank = learn_filters(&Mat::from_vec(120, 49, data), 1, 1).unwrap();
    let dot: f64 = bank.filters[0].iter().zip(&v).map(|(a, b)| a * b).sum();
    assert!(dot * dot >= 1.0 - 1e-8, "squared inner product {}", dot * dot);
}

// --------------------------------------------------------- criterion 3

#[test]
fn criterion_03_pipeline_equals_naive_oracle_exactly() {
    let cfg = PcanetConfig {
        patch_side: 3,
        filters_per_stage: 2,
        pool_window: 2,
        pool_stride: 2,
        block_grid: 4,
        bins: 4,
    };
    let mut rng = rng_from_seed(9303);
    for case in 0..50 {
        let frame = random_image(&mut rng, 12, 12);
        let (bank1, bank2) = learn_banks(std::slice::from_ref(&frame), &cfg);
        let fast = extract_feature(&frame, &bank1, &bank2, &cfg).unwrap();
        let naive = oracles::naive_feature(&frame, &bank1, &bank2, &cfg);
        assert_eq!(fast.len(), cfg.feature_len());
        assert_eq!(fast, naive, "case {case}");
    }
}

// --------------------------------------------------------- criterion 4

#[test]
fn criterion_04_lstm_gradients_match_central_differences() {
    const EPS: f64 = 1e-4;
    let (t_len, d, h, c) = (5usize, 6usize, 4usize, 3usize);
    let mut worst = 0.0f64;

    fn loss_at(p: &LstmParams, seq: &SparseSeq, labels: &[usize]) -> f64 {
        let (post, _) = forward(p, seq).unwrap();
        loss(&post, labels).unwrap()
    }

    type Select = fn(&mut LstmParams) -> &mut Vec<f64>;
    let selectors: [(Select, fn(&lipvsr_core::lstm::LstmTensors) -> &Vec<f64>); 4] = [
        (|p| &mut p.w, |g| &g.w),
        (|p| &mut p.b, |g| &g.b),
        (|p| &mut p.w_y, |g| &g.w_y),
        (|p| &mut p.b_y, |g| &g.b_y),
    ];

    for seed in 0..20u64 {
        let mut rng = rng_from_seed(9404 + seed);
        let mut params = LstmParams::init(d, h, c, 40 + seed);
        let feats = Mat::from_vec(
            t_len,
            d,
            (0..t_len * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
        );
        let seq = SparseSeq::from_dense(&feats);
        let labels: Vec<usize> = (0..t_len).map(|_| rng.random_range(0..c)).collect();

        let (posteriors, cache) = forward(&params, &seq).unwrap();
        for t in 0..t_len {
            let row_sum: f64 = posteriors.row(t).iter().sum();
            assert!((row_sum - 1.0).abs() <= 1e-9, "posterior row {t} sums to {row_sum}");
        }
        let grads = backward(&params, &seq, &cache, &labels, None).unwrap();

        for (select, select_grad) in selectors {
            for idx in 0..select(&mut params).len() {
                let saved = select(&mut params)[idx];
                select(&mut params)[idx] = saved + EPS;
                let up = loss_at(&params, &seq, &labels);
                select(&mut params)[idx] = saved - EPS;
                let down = loss_at(&params, &seq, &labels);
                select(&mut params)[idx] = saved;
                let numeric = (up - down) / (2.0 * EPS);
                let analytic = select_grad(&grads)[idx];
                let rel =
                    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
    }
    assert!(worst <= 1e-4, "max relative gradient error {worst:.3e}");
}

// --------------------------------------------------------- criterion 5

#[test]
fn criterion_05_em_monotone_and_k1_closed_form() {
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(9505 + seed);
        let (n, d) = (150usize, 3usize);
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            let center = [-3.0, 0.0, 3.0][i % 3];
            for _ in 0..d {
                data.push(center + (rng.random::<f64>() - 0.5) * 1.4);
            }
        }
        let data = Mat::from_vec(n, d, data);

        let (_, trace) = gmm_em(&data, 3, 20, seed, 1e-4).unwrap();
        assert_eq!(trace.len(), 20);
        for w in trace.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-8,
                "log-likelihood fell from {} to {} (seed {seed})",
                w[0],
                w[1]
            );
        }

        let (single, _) = gmm_em(&data, 1, 2, seed, 1e-4).unwrap();
        let (mean, var) = oracles::gaussian_ml(&data);
        assert_eq!(single.weights(), &[1.0]);
        for j in 0..d {
            assert!((single.means().get(0, j) - mean[j]).abs() <= 1e-12);
            assert!((single.variances().get(0, j) - var[j]).abs() <= 1e-12);
        }
    }
}

// --------------------------------------------------------- criterion 6

#[test]
fn criterion_06_viterbi_matches_exhaustive_enumeration() {
    let start = Instant::now();
    for seed in 0..200u64 {
        let mut rng = rng_from_seed(9606 + seed);
        let names = ["a", "b", "c"];
        let n_words = rng.random_range(1..=3);
        let mut hmms = Vec::new();
        for name in &names[..n_words] {
            let mut states = Vec::new();
            for _ in 0..2 {
                let means = Mat::from_vec(
                    1,
                    2,
                    vec![rng.random::<f64>() * 3.0 - 1.5, rng.random::<f64>() * 3.0 - 1.5],
                );
                let vars = Mat::from_vec(
                    1,
                    2,
                    vec![0.4 + rng.random::<f64>() * 1.2, 0.4 + rng.random::<f64>() * 1.2],
                );
                states.push(GaussianMixture::new(vec![1.0], means, vars).unwrap());
            }
            let self_probs = [
                0.2 + rng.random::<f64>() * 0.6,
                0.2 + rng.random::<f64>() * 0.6,
            ];
            hmms.push(WordHmm::new((*name).into(), states, &self_probs).unwrap());
        }
        let models = ModelSet::new(hmms).unwrap();

        let n_phrases = rng.random_range(1..=3);
        let mut phrases = Vec::new();
        for _ in 0..n_phrases {
            let len = rng.random_range(1..=3);
            phrases.push(
                (0..len)
                    .map(|_| names[rng.random_range(0..n_words)].to_string())
                    .collect::<Vec<_>>(),
            );
        }
        let min_states = 2 * phrases.iter().map(Vec::len).min().unwrap();
        let t_len = rng.random_range(min_states..=6.max(min_states));
        let obs = Mat::from_vec(
            t_len,
            2,
            (0..t_len * 2).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect(),
        );

        let grammar = Grammar::phrase_list(phrases.clone()).unwrap();
        let result = viterbi_decode(&models, &grammar, &obs).unwrap();

        let scores: Vec<Option<f64>> = phrases
            .iter()
            .map(|p| oracles::enumerate_phrase_score(&models, p, &obs))
            .collect();
        let best = scores
            .iter()
            .flatten()
            .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        assert!(
            (result.log_score - best).abs() <= 1e-9,
            "seed {seed}: decoder {} vs oracle {best}",
            result.log_score
        );
        // The decoded phrase itself must achieve the optimum.
        let decoded = scores[result.phrase_index.unwrap()].unwrap();
        assert!((decoded - best).abs() <= 1e-9, "seed {seed}: suboptimal phrase chosen");
    }
    let dt = start.elapsed().as_secs_f64();
    assert!(dt < 10.0, "200 enumeration checks took {dt:.1}s, budget 10");
}

// --------------------------------------------------------- criterion 7

#[test]
fn criterion_07_alignment_matches_edit_distance_oracle() {
    // Every sequence over a 3-word alphabet up to length 6.
    let mut seqs: Vec<Vec<u8>> = vec![Vec::new()];
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..6 {
        let mut next = Vec::new();
        for s in &frontier {
            for w in 0..3u8 {
                let mut t = s.clone();
                t.push(w);
                next.push(t);
            }
        }
        seqs.extend(next.iter().cloned());
        frontier = next;
    }
    assert_eq!(seqs.len(), 1093);

    for r in &seqs {
        for h in &seqs {
            let counts = align_words(r, h);
            let (cost, (oh, os, od, oi)) = oracles::edit_oracle(r, h);
            assert_eq!(
                (
                    counts.hits,
                    counts.substitutions,
                    counts.deletions,
                    counts.insertions
                ),
                (oh, os, od, oi),
                "ref {r:?} hyp {h:?}"
            );
            assert_eq!(counts.edit_cost(), cost);
            assert_eq!(cost, oracles::levenshtein(r, h), "ref {r:?} hyp {h:?}");
            assert_eq!(counts.hits + counts.substitutions + counts.deletions, r.len());
        }
    }

    // Random tuples: the H+S+D=N identity and accuracy <= correctness.
    let mut rng = rng_from_seed(9707);
    for _ in 0..1000 {
        let r: Vec<u8> = (0..rng.random_range(1..=12)).map(|_| rng.random_range(0..4)).collect();
        let h: Vec<u8> = (0..rng.random_range(0..=12)).map(|_| rng.random_range(0..4)).collect();
        let counts = align_words(&r, &h);
        assert_eq!(counts.hits + counts.substitutions + counts.deletions, counts.reference_len);
        let acc = accuracy(&counts).unwrap();
        let corr = correctness(&counts).unwrap();
        assert!(acc <= corr + 1e-12, "accuracy {acc} above correctness {corr}");
    }
}

// ----------------------------------------------- criteria 8..10 harness

struct EndToEnd {
    /// Tandem tag ("v0", "v30", "fused") to mean sentence correctness.
    sc: BTreeMap<String, f64>,
    /// View tag to (phoneme %, viseme %) frame accuracy.
    frames: BTreeMap<String, (f64, f64)>,
    /// Wall time of synth plus the complete single-view chain.
    single_view_secs: f64,
    report_reproduced: bool,
    hypotheses_reproduced: bool,
    corpus_reproduced: bool,
}

static E2E: OnceLock<Result<EndToEnd, String>> = OnceLock::new();

fn e2e() -> &'static EndToEnd {
    match E2E.get_or_init(run_end_to_end) {
        Ok(e) => e,
        Err(msg) => panic!("end-to-end pipeline failed: {msg}"),
    }
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_lipvsr"))
        .args(args)
        .output()
        .map_err(|e| format!("spawn lipvsr: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "lipvsr {} exited with {:?}\n--- stdout ---\n{}--- stderr ---\n{}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr),
        ));
    }
    Ok(())
}

fn arg(p: &Path) -> String {
    p.to_str().expect("utf-8 path").to_string()
}

/// learn-filters through score for one view.
fn run_view_chain(cfg: &Path, corpus: &Path, work: &Path, view: &str) -> Result<(), String> {
    let train = arg(&corpus.join("train.manifest"));
    let test = arg(&corpus.join("test.manifest"));
    let (cfg, work) = (arg(cfg), arg(work));
    let tag = format!("v{view}");
    let visemes = arg(&corpus.join("visemes.tsv"));
    let phrases = arg(&corpus.join("phrases.txt"));
    let base = ["--config", &cfg, "--out", &work];
    let join = |extra: &[&str]| {
        let mut v: Vec<String> = extra.iter().map(|s| s.to_string()).collect();
        v.extend(base.iter().map(|s| s.to_string()));
        v
    };
    let runs: Vec<Vec<String>> = vec![
        join(&["learn-filters", "--manifest", &train, "--view", view]),
        join(&["extract", "--manifest", &train, "--manifest", &test, "--view", view]),
        join(&["train-lstm", "--manifest", &train, "--view", view]),
        join(&["posteriors", "--manifest", &train, "--manifest", &test, "--view", view]),
        join(&["tandem", "--manifest", &train, "--manifest", &test, "--view", view]),
        join(&["train-hmm", "--manifest", &train, "--tag", &tag]),
        join(&["decode", "--manifest", &test, "--tag", &tag, "--grammar", &phrases]),
        join(&[
            "score", "--manifest", &test, "--tag", &tag, "--view", view, "--frames-view", view,
            "--visemes", &visemes,
        ]),
    ];
    for argv in runs {
        let refs: Vec<&str> = argv.iter().map(String::as_str).collect();
        run_cli(&refs)?;
    }
    Ok(())
}

fn mean_sc(report_csv: &Path) -> Result<f64, String> {
    let text = std::fs::read_to_string(report_csv)
        .map_err(|e| format!("{}: {e}", report_csv.display()))?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("mean,") {
            let field = rest.split(',').nth(1).ok_or_else(|| "mean row too short".to_string())?;
            return field.parse().map_err(|e| format!("SC field: {e}"));
        }
    }
    Err(format!("no mean row in {}", report_csv.display()))
}

fn frame_accuracies(report_csv: &Path) -> Result<(f64, f64), String> {
    let text = std::fs::read_to_string(report_csv)
        .map_err(|e| format!("{}: {e}", report_csv.display()))?;
    let (mut phoneme, mut viseme) = (None, None);
    for line in text.lines() {
        if let Some(v) = line.strip_prefix("phoneme,") {
            phoneme = Some(v.parse().map_err(|e| format!("phoneme field: {e}"))?);
        }
        if let Some(v) = line.strip_prefix("viseme,") {
            viseme = Some(v.parse().map_err(|e| format!("viseme field: {e}"))?);
        }
    }
    match (phoneme, viseme) {
        (Some(p), Some(v)) => Ok((p, v)),
        _ => Err(format!("incomplete frame report {}", report_csv.display())),
    }
}

fn read_bytes(p: &Path) -> Result<Vec<u8>, String> {
    std::fs::read(p).map_err(|e| format!("{}: {e}", p.display()))
}

fn run_end_to_end() -> Result<EndToEnd, String> {
    let base = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_e2e");
    let _ = std::fs::remove_dir_all(&base);
    std::fs::create_dir_all(&base).map_err(|e| format!("{}: {e}", base.display()))?;

    // Criterion 8 pins iteration and mixture counts; hidden size and the
    // filter-learning frame cap are free, sized for the runtime budget.
    let cfg = base.join("accept.toml");
    std::fs::write(
        &cfg,
        "[pcanet]\nframe_cap = 300\n\n[lstm]\nhidden = 32\niterations = 2000\n\n[hmm]\nmax_mixtures = 4\n",
    )
    .map_err(|e| format!("{}: {e}", cfg.display()))?;

    let synth_args = |out: &Path| {
        vec![
            "synth".to_string(),
            "--seed".into(),
            "7".into(),
            "--speakers".into(),
            "8".into(),
            "--phrases".into(),
            "10".into(),
            "--reps".into(),
            "3".into(),
            "--noise".into(),
            "0.1".into(),
            "--out".into(),
            arg(out),
            "--config".into(),
            arg(&cfg),
        ]
    };

    // First run: both views plus fusion.
    let corpus_a = base.join("a").join("corpus");
    let work_a = base.join("a").join("work");
    let started = Instant::now();
    let argv = synth_args(&corpus_a);
    run_cli(&argv.iter().map(String::as_str).collect::<Vec<_>>())?;
    run_view_chain(&cfg, &corpus_a, &work_a, "0")?;
    let single_view_secs = started.elapsed().as_secs_f64();
    run_view_chain(&cfg, &corpus_a, &work_a, "30")?;

    let train = arg(&corpus_a.join("train.manifest"));
    let test = arg(&corpus_a.join("test.manifest"));
    let phrases = arg(&corpus_a.join("phrases.txt"));
    let (cfg_s, work_s) = (arg(&cfg), arg(&work_a));
    let (train, test) = (train.as_str(), test.as_str());
    let tail = ["--config", cfg_s.as_str(), "--out", work_s.as_str()];
    for argv in [
        vec!["fuse", "--manifest", train, "--manifest", test],
        vec!["train-hmm", "--manifest", train, "--tag", "fused"],
        vec!["decode", "--manifest", test, "--tag", "fused", "--grammar", phrases.as_str()],
        vec!["score", "--manifest", test, "--tag", "fused", "--view-label", "fused"],
    ] {
        let mut argv = argv;
        argv.extend_from_slice(&tail);
        run_cli(&argv)?;
    }

    // Second run: the single-view pipeline again from scratch.
    let corpus_b = base.join("b").join("corpus");
    let work_b = base.join("b").join("work");
    let argv = synth_args(&corpus_b);
    run_cli(&argv.iter().map(String::as_str).collect::<Vec<_>>())?;
    run_view_chain(&cfg, &corpus_b, &work_b, "0")?;

    let mut sc = BTreeMap::new();
    for tag in ["v0", "v30", "fused"] {
        sc.insert(tag.to_string(), mean_sc(&work_a.join("reports").join(format!("{tag}.csv")))?);
    }
    let mut frames = BTreeMap::new();
    for tag in ["v0", "v30"] {
        frames.insert(
            tag.to_string(),
            frame_accuracies(&work_a.join("reports").join(format!("{tag}_frames.csv")))?,
        );
    }

    let report_reproduced = read_bytes(&work_a.join("reports").join("v0.csv"))?
        == read_bytes(&work_b.join("reports").join("v0.csv"))?;
    let hypotheses_reproduced = read_bytes(&work_a.join("decode").join("v0.hyp"))?
        == read_bytes(&work_b.join("decode").join("v0.hyp"))?;
    let corpus_reproduced = lipvsr::synth::tree_sha256(&corpus_a)
        .map_err(|e| e.to_string())?
        == lipvsr::synth::tree_sha256(&corpus_b).map_err(|e| e.to_string())?;

    Ok(EndToEnd {
        sc,
        frames,
        single_view_secs,
        report_reproduced,
        hypotheses_reproduced,
        corpus_reproduced,
    })
}

// --------------------------------------------------------- criterion 8

#[test]
fn criterion_08_end_to_end_correctness_runtime_reproducibility() {
    let e = e2e();
    let sc = e.sc["v0"];
    assert!(sc >= 90.0, "held-out sentence correctness {sc:.2}% below 90%");
    assert!(
        e.single_view_secs <= 600.0,
        "single-view pipeline took {:.0}s, budget 600",
        e.single_view_secs
    );
    assert!(e.corpus_reproduced, "synthesized corpus differs between identical runs");
    assert!(e.report_reproduced, "score report differs between identical runs");
    assert!(e.hypotheses_reproduced, "decoded hypotheses differ between identical runs");
}

// --------------------------------------------------------- criterion 9

#[test]
fn criterion_09_fusion_not_worse_than_best_single_view() {
    let e = e2e();
    let best_single = e.sc["v0"].max(e.sc["v30"]);
    assert!(
        e.sc["fused"] >= best_single,
        "fused SC {:.2}% below best single view {:.2}%",
        e.sc["fused"],
        best_single
    );
}

// -------------------------------------------------------- criterion 10

#[test]
fn criterion_10_viseme_accuracy_dominates_phoneme_accuracy() {
    let e = e2e();
    for (view, &(phoneme, viseme)) in &e.frames {
        assert!(
            viseme >= phoneme,
            "view {view}: viseme accuracy {viseme:.2}% below phoneme {phoneme:.2}%"
        );
    }
}
