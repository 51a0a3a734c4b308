//! On-disk formats: PGM frames, utterance manifests, frame labels,
//! binary feature files, viseme maps, phrase lists, and hypotheses.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lipvsr_core::image::GrayImage;
use lipvsr_core::scoring::VisemeMap;
use lipvsr_core::Mat;
use thiserror::Error;

/// Frame-label inventory: class 0 is silence, 1..=27 are speech classes.
pub const N_CLASSES: usize = 28;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io: {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("format: {path}: byte {offset}: {what}")]
    Format { path: PathBuf, offset: usize, what: String },
    #[error("format: {path}:{line}: {what}")]
    Line { path: PathBuf, line: usize, what: String },
    #[error("data: {0}")]
    Invalid(String),
}

impl DataError {
    pub fn category(&self) -> &'static str {
        match self {
            DataError::Io { .. } => "io",
            DataError::Format { .. } | DataError::Line { .. } => "format",
            DataError::Invalid(_) => "data",
        }
    }
}

fn io_err(path: &Path, source: io::Error) -> DataError {
    DataError::Io { path: path.to_path_buf(), source }
}

pub type Result<T> = std::result::Result<T, DataError>;

// ---------------------------------------------------------------- views

/// Camera angle of a recording. The profile view is included for
/// completeness; the synthetic corpus defaults to 0 and 30 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum View {
    Deg0,
    Deg30,
    Deg45,
    Deg60,
    Deg90,
}

impl View {
    pub const ALL: [View; 5] = [View::Deg0, View::Deg30, View::Deg45, View::Deg60, View::Deg90];

    pub fn parse(s: &str) -> Option<View> {
        match s {
            "0" => Some(View::Deg0),
            "30" => Some(View::Deg30),
            "45" => Some(View::Deg45),
            "60" => Some(View::Deg60),
            "90" => Some(View::Deg90),
            _ => None,
        }
    }

    pub fn degrees(self) -> u32 {
        match self {
            View::Deg0 => 0,
            View::Deg30 => 30,
            View::Deg45 => 45,
            View::Deg60 => 60,
            View::Deg90 => 90,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            View::Deg0 => "0",
            View::Deg30 => "30",
            View::Deg45 => "45",
            View::Deg60 => "60",
            View::Deg90 => "90",
        }
    }

    /// Directory-friendly tag, e.g. `v0`, `v30`.
    pub fn tag(self) -> String {
        format!("v{}", self.label())
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

// ----------------------------------------------------------------- PGM

/// Loads a binary PGM (P5, maxval 255) and rescales intensities to
/// [0, 1]. Errors name the byte offset of the offending token.
pub fn load_image(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    parse_pgm(&bytes).map_err(|(offset, what)| DataError::Format {
        path: path.to_path_buf(),
        offset,
        what,
    })
}

fn parse_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, (usize, String)> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err((0, "expected PGM magic \"P5\"".into()));
    }
    if bytes[1] != b'5' {
        return Err((1, format!("unsupported PGM variant \"P{}\"; only binary P5", bytes[1] as char)));
    }
    let mut pos = 2;
    let next_int = |pos: &mut usize| -> std::result::Result<(usize, usize), (usize, String)> {
        // Skip whitespace and '#' comment lines.
        loop {
            match bytes.get(*pos) {
                Some(b) if b.is_ascii_whitespace() => *pos += 1,
                Some(b'#') => {
                    while *pos < bytes.len() && bytes[*pos] != b'\n' {
                        *pos += 1;
                    }
                }
                _ => break,
            }
        }
        let start = *pos;
        let mut value: usize = 0;
        let mut digits = 0;
        while let Some(b) = bytes.get(*pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as usize))
                .ok_or((start, "header value overflows".to_string()))?;
            digits += 1;
            *pos += 1;
        }
        if digits == 0 {
            return Err((start, "expected an unsigned integer".into()));
        }
        Ok((value, start))
    };

    let (width, woff) = next_int(&mut pos)?;
    let (height, hoff) = next_int(&mut pos)?;
    let (maxval, moff) = next_int(&mut pos)?;
    if width == 0 {
        return Err((woff, "zero width".into()));
    }
    if height == 0 {
        return Err((hoff, "zero height".into()));
    }
    if maxval != 255 {
        return Err((moff, format!("unsupported maxval {maxval}; only 255")));
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err((pos, "expected single whitespace after maxval".into())),
    }
    let need = width * height;
    let have = bytes.len() - pos;
    if have < need {
        return Err((bytes.len(), format!("truncated payload: need {need} bytes, have {have}")));
    }
    if have > need {
        return Err((pos + need, format!("{} trailing bytes after payload", have - need)));
    }
    let pixels = bytes[pos..].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok(GrayImage::new(width, height, pixels))
}

/// Writes a [0, 1] image as binary PGM, rounding to 8-bit levels.
pub fn write_image(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = Vec::with_capacity(20 + img.pixels.len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", img.width, img.height).as_bytes());
    for &p in &img.pixels {
        out.push((p.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

// ------------------------------------------------------------- manifest

/// One recorded utterance: a directory of frames plus its transcript
/// and optional per-frame class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub speaker: String,
    pub view: View,
    /// Frames directory exactly as written in the manifest.
    pub frames_dir: String,
    /// Frame files resolved against the manifest's directory, in index order.
    pub frame_paths: Vec<PathBuf>,
    pub transcript: Vec<String>,
    /// Label file path exactly as written in the manifest, if any.
    pub labels_path: Option<String>,
    pub frame_labels: Option<Vec<usize>>,
}

impl Utterance {
    pub fn n_frames(&self) -> usize {
        self.frame_paths.len()
    }

    /// Canonical manifest line; `load_manifest` of a re-serialized
    /// manifest yields the same utterances.
    pub fn manifest_line(&self) -> String {
        let mut line = format!(
            "{}\t{}\t{}\t{}\t{}",
            self.id,
            self.speaker,
            self.view,
            self.frames_dir,
            self.transcript.join(" ")
        );
        if let Some(labels) = &self.labels_path {
            line.push('\t');
            line.push_str(labels);
        }
        line
    }
}

fn scan_frames(dir: &Path) -> std::result::Result<Vec<PathBuf>, String> {
    let entries = fs::read_dir(dir).map_err(|e| format!("cannot read frames dir {}: {e}", dir.display()))?;
    let mut indexed = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| format!("cannot read frames dir {}: {e}", dir.display()))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(stem) = name.strip_prefix("frame_").and_then(|s| s.strip_suffix(".pgm")) else {
            continue;
        };
        if stem.len() == 6 && stem.bytes().all(|b| b.is_ascii_digit()) {
            let idx: usize = stem.parse().unwrap();
            indexed.push((idx, entry.path()));
        }
    }
    if indexed.is_empty() {
        return Err(format!("no frame_%06d.pgm files in {}", dir.display()));
    }
    indexed.sort_by_key(|(idx, _)| *idx);
    for (want, (idx, _)) in (1..).zip(&indexed) {
        if *idx != want {
            return Err(format!(
                "non-contiguous frame indices in {}: expected frame_{want:06}.pgm, found frame_{idx:06}.pgm",
                dir.display()
            ));
        }
    }
    Ok(indexed.into_iter().map(|(_, p)| p).collect())
}

/// Parses a TSV manifest: `id speaker view frames_dir transcript [labels]`
/// per line, tab-separated, with relative paths resolved against the
/// manifest's own directory.
pub fn load_manifest(path: &Path, n_classes: usize) -> Result<Vec<Utterance>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let err = |line: usize, what: String| DataError::Line { path: path.to_path_buf(), line, what };

    let mut seen = BTreeSet::new();
    let mut utterances = Vec::new();
    for (lineno, raw) in (1..).zip(text.lines()) {
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if fields.len() != 5 && fields.len() != 6 {
            return Err(err(lineno, format!("expected 5 or 6 tab-separated fields, found {}", fields.len())));
        }
        let view = View::parse(fields[2])
            .ok_or_else(|| err(lineno, format!("unknown view \"{}\" (expected 0/30/45/60/90)", fields[2])))?;
        let transcript: Vec<String> = fields[4].split(' ').filter(|w| !w.is_empty()).map(String::from).collect();
        if transcript.is_empty() {
            return Err(err(lineno, "empty transcript".into()));
        }
        if !seen.insert((fields[0].to_string(), view)) {
            return Err(err(lineno, format!("duplicate utterance {} view {view}", fields[0])));
        }
        let frames_dir = fields[3].to_string();
        let frame_paths = scan_frames(&base.join(&frames_dir)).map_err(|what| err(lineno, what))?;

        let labels_path = fields.get(5).map(|s| s.to_string());
        let frame_labels = match &labels_path {
            Some(rel) => {
                let labels = load_labels(&base.join(rel), n_classes)?;
                if labels.len() != frame_paths.len() {
                    return Err(err(
                        lineno,
                        format!("label file {rel} has {} lines for {} frames", labels.len(), frame_paths.len()),
                    ));
                }
                Some(labels)
            }
            None => None,
        };

        utterances.push(Utterance {
            id: fields[0].to_string(),
            speaker: fields[1].to_string(),
            view,
            frames_dir,
            frame_paths,
            transcript,
            labels_path,
            frame_labels,
        });
    }
    Ok(utterances)
}

pub fn write_manifest(path: &Path, utterances: &[Utterance]) -> Result<()> {
    let mut text = String::new();
    for u in utterances {
        text.push_str(&u.manifest_line());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

// --------------------------------------------------------------- labels

/// Reads one class index per line, each in `[0, n_classes)`.
pub fn load_labels(path: &Path, n_classes: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let err = |line: usize, what: String| DataError::Line { path: path.to_path_buf(), line, what };
    let mut labels = Vec::new();
    for (lineno, raw) in (1..).zip(text.lines()) {
        let value: usize = raw
            .trim()
            .parse()
            .map_err(|_| err(lineno, format!("not an unsigned integer: \"{raw}\"")))?;
        if value >= n_classes {
            return Err(err(lineno, format!("class {value} out of range [0, {n_classes})")));
        }
        labels.push(value);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut text = String::new();
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

// ------------------------------------------------------------- features

pub const FEATURE_MAGIC: &[u8; 8] = b"LIPFEAT1";

/// Writes frame-major feature vectors as 32-bit little-endian floats
/// behind an 8-byte magic and u32 count/dim header.
pub fn write_features(path: &Path, frames: &Mat) -> Result<()> {
    let count = u32::try_from(frames.rows()).map_err(|_| DataError::Invalid("too many frames".into()))?;
    let dim = u32::try_from(frames.cols()).map_err(|_| DataError::Invalid("feature dim too large".into()))?;
    let mut out = Vec::with_capacity(16 + frames.data().len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&dim.to_le_bytes());
    for &v in frames.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_features(path: &Path) -> Result<Mat> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let fmt = |offset: usize, what: String| DataError::Format { path: path.to_path_buf(), offset, what };
    if bytes.len() < 16 {
        return Err(fmt(bytes.len(), "file shorter than the 16-byte header".into()));
    }
    if &bytes[..8] != FEATURE_MAGIC {
        return Err(fmt(0, format!("bad magic {:?}, expected {:?}", &bytes[..8], FEATURE_MAGIC)));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let dim = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let need = count
        .checked_mul(dim)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| fmt(8, "header size overflows".into()))?;
    let have = bytes.len() - 16;
    if have != need {
        return Err(fmt(
            16,
            format!("header promises {count} frames x {dim} dims ({need} payload bytes), found {have}"),
        ));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())))
        .collect();
    Ok(Mat::from_vec(count, dim, data))
}

// ------------------------------------------------------------- visemes

/// Parses `phoneme<TAB>viseme` lines into a validated many-to-one map
/// covering every phoneme class exactly once.
pub fn load_viseme_map(path: &Path, n_classes: usize) -> Result<VisemeMap> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let err = |line: usize, what: String| DataError::Line { path: path.to_path_buf(), line, what };
    let mut map = vec![usize::MAX; n_classes];
    for (lineno, raw) in (1..).zip(text.lines()) {
        if raw.is_empty() {
            continue;
        }
        let (p, v) = raw
            .split_once('\t')
            .ok_or_else(|| err(lineno, "expected phoneme<TAB>viseme".into()))?;
        let p: usize = p.trim().parse().map_err(|_| err(lineno, format!("bad phoneme index \"{p}\"")))?;
        let v: usize = v.trim().parse().map_err(|_| err(lineno, format!("bad viseme index \"{v}\"")))?;
        if p >= n_classes {
            return Err(err(lineno, format!("phoneme {p} out of range [0, {n_classes})")));
        }
        if map[p] != usize::MAX {
            return Err(err(lineno, format!("phoneme {p} mapped twice")));
        }
        map[p] = v;
    }
    if let Some(p) = map.iter().position(|&v| v == usize::MAX) {
        return Err(DataError::Invalid(format!("{}: phoneme {p} has no viseme entry", path.display())));
    }
    let n_visemes = map.iter().max().copied().unwrap_or(0) + 1;
    VisemeMap::new(map, n_visemes).map_err(|e| DataError::Invalid(format!("{}: {e}", path.display())))
}

pub fn write_viseme_map(path: &Path, map: &VisemeMap) -> Result<()> {
    let mut text = String::new();
    for (p, v) in map.entries().iter().enumerate() {
        text.push_str(&format!("{p}\t{v}\n"));
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

// ------------------------------------------------------------- phrases

/// Reads a phrase list (one phrase per line, words space-separated).
pub fn load_phrases(path: &Path) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut phrases = Vec::new();
    for (lineno, raw) in (1..).zip(text.lines()) {
        let words: Vec<String> = raw.split(' ').filter(|w| !w.is_empty()).map(String::from).collect();
        if words.is_empty() {
            return Err(DataError::Line {
                path: path.to_path_buf(),
                line: lineno,
                what: "empty phrase".into(),
            });
        }
        phrases.push(words);
    }
    if phrases.is_empty() {
        return Err(DataError::Invalid(format!("{}: no phrases", path.display())));
    }
    Ok(phrases)
}

pub fn write_phrases(path: &Path, phrases: &[Vec<String>]) -> Result<()> {
    let mut text = String::new();
    for p in phrases {
        text.push_str(&p.join(" "));
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

// ---------------------------------------------------------- hypotheses

/// Writes decoded transcripts as `id<TAB>words` lines.
pub fn write_hypotheses(path: &Path, hyps: &[(String, Vec<String>)]) -> Result<()> {
    let mut text = String::new();
    for (id, words) in hyps {
        text.push_str(&format!("{id}\t{}\n", words.join(" ")));
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn load_hypotheses(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut hyps = Vec::new();
    for (lineno, raw) in (1..).zip(text.lines()) {
        if raw.is_empty() {
            continue;
        }
        let (id, rest) = raw.split_once('\t').ok_or_else(|| DataError::Line {
            path: path.to_path_buf(),
            line: lineno,
            what: "expected id<TAB>words".into(),
        })?;
        let words = rest.split(' ').filter(|w| !w.is_empty()).map(String::from).collect();
        hyps.push((id.to_string(), words));
    }
    Ok(hyps)
}
