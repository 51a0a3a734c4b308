//! Deterministic synthetic lip-reading corpus: ten short phrases over a
//! twenty-word lexicon, each frame label rendered as an elliptical mouth
//! shape with class-specific aperture, per-speaker geometry/brightness
//! jitter, per-view compression, and seeded additive noise.

use std::fs;
use std::path::{Path, PathBuf};

use lipvsr_core::image::GrayImage;
use lipvsr_core::rng::{rng_from_seed, sub_seed};
use lipvsr_core::scoring::VisemeMap;
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::dataio::{self, DataError, Utterance, View, N_CLASSES};

pub const PHRASES: [&str; 10] = [
    "excuse me",
    "goodbye",
    "hello",
    "how are you",
    "nice to meet you",
    "see you",
    "i am sorry",
    "thank you",
    "have a good time",
    "you are welcome",
];

/// Fixed pronunciation table over speech classes 1..=27 (0 is silence).
/// Every class appears in at least one word.
pub fn word_classes(word: &str) -> Option<&'static [usize]> {
    Some(match word {
        "excuse" => &[5, 10, 21, 24, 9],
        "me" => &[13, 6],
        "goodbye" => &[8, 20, 3, 19, 6],
        "hello" => &[11, 5, 12, 16],
        "how" => &[11, 4, 18],
        "are" => &[1, 17],
        "you" => &[26, 20],
        "nice" => &[14, 2, 9],
        "to" => &[22, 20],
        "meet" => &[13, 6, 22],
        "see" => &[9, 6],
        "i" => &[2],
        "am" => &[1, 13],
        "sorry" => &[9, 15, 17, 6],
        "thank" => &[23, 1, 14, 7],
        "have" => &[11, 1, 25],
        "a" => &[27],
        "good" => &[8, 20, 3],
        "time" => &[22, 2, 13],
        "welcome" => &[25, 5, 12, 21, 13],
        _ => return None,
    })
}

/// Phoneme class -> viseme class; consecutive classes share lip shapes.
pub fn default_viseme_map() -> VisemeMap {
    let map: Vec<usize> = (0..N_CLASSES).map(|c| c * 12 / N_CLASSES).collect();
    VisemeMap::new(map, 12).expect("covers all 12 visemes")
}

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub seed: u64,
    pub speakers: usize,
    pub phrases: usize,
    pub reps: usize,
    pub noise: f64,
    pub views: Vec<View>,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 7,
            speakers: 4,
            phrases: 10,
            reps: 3,
            noise: 0.1,
            views: vec![View::Deg0, View::Deg30],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSummary {
    pub train_speakers: Vec<String>,
    pub test_speakers: Vec<String>,
    /// Manifest lines (one per utterance and view).
    pub train_lines: usize,
    pub test_lines: usize,
    pub total_frames: usize,
}

struct SpeakerJitter {
    scale: f64,
    cx_off: f64,
    cy_off: f64,
    gain: f64,
}

impl SpeakerJitter {
    fn draw(seed: u64, speaker: usize) -> Self {
        let mut rng = rng_from_seed(sub_seed(seed, &[1, speaker as u64]));
        SpeakerJitter {
            scale: 0.92 + 0.16 * rng.random::<f64>(),
            cx_off: -3.0 + 6.0 * rng.random::<f64>(),
            cy_off: -2.0 + 4.0 * rng.random::<f64>(),
            gain: 0.9 + 0.2 * rng.random::<f64>(),
        }
    }
}

/// Horizontal compression, brightness, and x-shift per camera angle.
fn view_transform(view: View) -> (f64, f64, f64) {
    match view {
        View::Deg0 => (1.0, 1.0, 0.0),
        View::Deg30 => (0.866, 0.96, 3.0),
        View::Deg45 => (0.707, 0.93, 5.0),
        View::Deg60 => (0.5, 0.9, 7.0),
        View::Deg90 => (0.22, 0.85, 9.0),
    }
}

/// Mouth-shape intensity at offset (dx, dy) from the mouth center for
/// one label class. Classes open the mouth progressively; the inner
/// cavity, teeth visibility, and lip tone cycle to keep neighbors apart.
fn shape(class: usize, dx: f64, dy: f64) -> f64 {
    let (a_out, b_out, a_in, b_in, teeth, lip) = if class == 0 {
        (34.0, 3.0, 24.0, 0.9, false, 0.78)
    } else {
        let t = class as f64 / 27.0;
        let b_out = 5.0 + 21.0 * t;
        let a_out = 34.0 - 9.0 * t;
        let b_in = (b_out - 3.5 - (class % 3) as f64 * 0.9).max(0.8);
        (
            a_out,
            b_out,
            a_out * 0.70,
            b_in,
            class >= 6 && class % 2 == 0,
            0.68 + 0.035 * (class % 4) as f64,
        )
    };
    let r_out = (dx / a_out).powi(2) + (dy / b_out).powi(2);
    if r_out > 1.0 {
        return 0.18;
    }
    let r_in = (dx / a_in).powi(2) + (dy / b_in).powi(2);
    if r_in <= 1.0 {
        if teeth && dy.abs() <= 1.9 {
            0.92
        } else {
            0.06 + 0.02 * (class % 2) as f64
        }
    } else {
        lip
    }
}

fn render_frame(
    class: usize,
    jitter: &SpeakerJitter,
    view: View,
    noise: f64,
    rng: &mut lipvsr_core::rng::DetRng,
) -> GrayImage {
    let (compress, vgain, vshift) = view_transform(view);
    let cx = 45.0 + jitter.cx_off + vshift;
    let cy = 30.0 + jitter.cy_off;
    let mut img = GrayImage::zeros(90, 60);
    for y in 0..60 {
        for x in 0..90 {
            let dx = (x as f64 - cx) / (jitter.scale * compress);
            let dy = (y as f64 - cy) / jitter.scale;
            let mut v = shape(class, dx, dy) * jitter.gain * vgain;
            if noise > 0.0 {
                v += noise * (2.0 * rng.random::<f64>() - 1.0);
            }
            img.set(y, x, v.clamp(0.0, 1.0));
        }
    }
    img
}

/// Expands a phrase into per-frame labels: two silence frames on each
/// side, each speech class held 2-3 frames (seeded per utterance).
fn label_sequence(phrase: &str, rng: &mut lipvsr_core::rng::DetRng) -> Vec<usize> {
    let mut labels = vec![0, 0];
    for word in phrase.split(' ') {
        for &class in word_classes(word).expect("lexicon covers phrase words") {
            let dur = 2 + rng.random_range(0..=1);
            labels.extend(std::iter::repeat(class).take(dur));
        }
    }
    labels.extend_from_slice(&[0, 0]);
    labels
}

/// Writes the corpus tree and split manifests. Identical parameters
/// produce byte-identical trees; the last max(1, speakers/4) speakers
/// form the test split.
pub fn generate(out: &Path, p: &SynthParams) -> Result<SynthSummary, DataError> {
    if p.phrases == 0 || p.phrases > PHRASES.len() {
        return Err(DataError::Invalid(format!("phrases must be in 1..={}, got {}", PHRASES.len(), p.phrases)));
    }
    if p.reps == 0 {
        return Err(DataError::Invalid("reps must be at least 1".into()));
    }
    if p.speakers < 2 {
        return Err(DataError::Invalid("need at least 2 speakers (one train, one test)".into()));
    }
    if p.views.is_empty() {
        return Err(DataError::Invalid("need at least one view".into()));
    }
    if !(p.noise >= 0.0) {
        return Err(DataError::Invalid(format!("noise must be >= 0, got {}", p.noise)));
    }

    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |e: std::io::Error| DataError::Io { path, source: e }
    };
    fs::create_dir_all(out).map_err(io(out))?;

    let n_test = (p.speakers / 4).max(1);
    let n_train = p.speakers - n_test;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut total_frames = 0usize;

    for speaker_idx in 0..p.speakers {
        let speaker = format!("s{:02}", speaker_idx + 1);
        let jitter = SpeakerJitter::draw(p.seed, speaker_idx);
        for phrase_idx in 0..p.phrases {
            let phrase = PHRASES[phrase_idx];
            for rep in 0..p.reps {
                let id = format!("{speaker}_p{:02}_r{}", phrase_idx + 1, rep + 1);
                let mut dur_rng = rng_from_seed(sub_seed(
                    p.seed,
                    &[2, speaker_idx as u64, phrase_idx as u64, rep as u64],
                ));
                let labels = label_sequence(phrase, &mut dur_rng);

                let labels_rel = format!("labels/{id}.labels");
                fs::create_dir_all(out.join("labels")).map_err(io(&out.join("labels")))?;
                dataio::write_labels(&out.join(&labels_rel), &labels)?;

                for &view in &p.views {
                    let frames_rel = format!("frames/{id}/{}", view.tag());
                    let frames_dir = out.join(&frames_rel);
                    fs::create_dir_all(&frames_dir).map_err(io(&frames_dir))?;
                    let mut noise_rng = rng_from_seed(sub_seed(
                        p.seed,
                        &[3, speaker_idx as u64, phrase_idx as u64, rep as u64, u64::from(view.degrees())],
                    ));
                    let mut frame_paths = Vec::with_capacity(labels.len());
                    for (t, &class) in labels.iter().enumerate() {
                        let img = render_frame(class, &jitter, view, p.noise, &mut noise_rng);
                        let path = frames_dir.join(format!("frame_{:06}.pgm", t + 1));
                        dataio::write_image(&path, &img)?;
                        frame_paths.push(path);
                    }
                    total_frames += labels.len();

                    let utt = Utterance {
                        id: id.clone(),
                        speaker: speaker.clone(),
                        view,
                        frames_dir: frames_rel.clone(),
                        frame_paths,
                        transcript: phrase.split(' ').map(String::from).collect(),
                        labels_path: Some(labels_rel.clone()),
                        frame_labels: Some(labels.clone()),
                    };
                    if speaker_idx < n_train {
                        train.push(utt);
                    } else {
                        test.push(utt);
                    }
                }
            }
        }
    }

    dataio::write_manifest(&out.join("train.manifest"), &train)?;
    dataio::write_manifest(&out.join("test.manifest"), &test)?;
    let phrases: Vec<Vec<String>> = PHRASES[..p.phrases]
        .iter()
        .map(|s| s.split(' ').map(String::from).collect())
        .collect();
    dataio::write_phrases(&out.join("phrases.txt"), &phrases)?;
    dataio::write_viseme_map(&out.join("visemes.tsv"), &default_viseme_map())?;

    let mut words: Vec<&str> = phrases.iter().flatten().map(String::as_str).collect();
    words.sort_unstable();
    words.dedup();
    let mut lexicon = String::new();
    for w in words {
        let classes: Vec<String> = word_classes(w).unwrap().iter().map(|c| c.to_string()).collect();
        lexicon.push_str(&format!("{w}\t{}\n", classes.join(" ")));
    }
    fs::write(out.join("lexicon.txt"), lexicon).map_err(io(&out.join("lexicon.txt")))?;

    Ok(SynthSummary {
        train_speakers: (0..n_train).map(|i| format!("s{:02}", i + 1)).collect(),
        test_speakers: (n_train..p.speakers).map(|i| format!("s{:02}", i + 1)).collect(),
        train_lines: train.len(),
        test_lines: test.len(),
        total_frames,
    })
}

/// SHA-256 over a directory tree: relative paths and file bytes in
/// sorted order. Used to assert corpus determinism.
pub fn tree_sha256(root: &Path) -> Result<String, DataError> {
    fn walk(root: &Path, dir: &Path, hasher: &mut Sha256) -> Result<(), DataError> {
        let io = |e: std::io::Error| DataError::Io { path: dir.to_path_buf(), source: e };
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(io)?
            .map(|e| e.map(|e| e.path()))
            .collect::<std::result::Result<_, _>>()
            .map_err(io)?;
        entries.sort();
        for path in entries {
            if path.is_dir() {
                walk(root, &path, hasher)?;
            } else {
                let rel = path.strip_prefix(root).unwrap();
                hasher.update(rel.to_string_lossy().as_bytes());
                hasher.update([0]);
                hasher.update(fs::read(&path).map_err(|e| DataError::Io { path: path.clone(), source: e })?);
                hasher.update([0]);
            }
        }
        Ok(())
    }
    let mut hasher = Sha256::new();
    walk(root, root, &mut hasher)?;
    Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
}
