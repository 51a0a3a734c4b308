//! Model and stage-output serialization. Every artifact embeds the
//! SHA-256 of the config that produced it; consuming stages refuse
//! artifacts from a different config unless forced.
//!
//! Model files are a text header (magic, kind, hash, key=value lines,
//! then `data=<count>`) followed by little-endian f64 payload. Stage
//! output directories carry a `_meta.toml` with the same hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use lipvsr_core::gmmhmm::{GaussianMixture, ModelSet, WordHmm};
use lipvsr_core::lstm::LstmParams;
use lipvsr_core::pcanet::FilterBank;
use lipvsr_core::Mat;
use serde::{Deserialize, Serialize};

use crate::dataio::DataError;

pub const ARTIFACT_MAGIC: &str = "LIPART01";
pub const META_FILE: &str = "_meta.toml";

type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone)]
pub struct ArtifactHeader {
    pub kind: String,
    pub hash: String,
    pub fields: BTreeMap<String, String>,
}

impl ArtifactHeader {
    fn get(&self, path: &Path, key: &str) -> Result<&str> {
        self.fields
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| DataError::Invalid(format!("{}: header misses key {key}", path.display())))
    }

    fn get_usize(&self, path: &Path, key: &str) -> Result<usize> {
        self.get(path, key)?
            .parse()
            .map_err(|_| DataError::Invalid(format!("{}: header key {key} is not an integer", path.display())))
    }
}

pub fn write_artifact(
    path: &Path,
    kind: &str,
    hash: &str,
    fields: &[(String, String)],
    payload: &[f64],
) -> Result<()> {
    let mut out = format!("{ARTIFACT_MAGIC}\nkind={kind}\nhash={hash}\n").into_bytes();
    for (k, v) in fields {
        debug_assert!(!k.contains('\n') && !v.contains('\n'));
        out.extend_from_slice(format!("{k}={v}\n").as_bytes());
    }
    out.extend_from_slice(format!("data={}\n", payload.len()).as_bytes());
    for &v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| DataError::Io { path: path.to_path_buf(), source: e })
}

pub fn read_artifact(path: &Path, expect_kind: &str) -> Result<(ArtifactHeader, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| DataError::Io { path: path.to_path_buf(), source: e })?;
    let fmt = |offset: usize, what: String| DataError::Format { path: path.to_path_buf(), offset, what };

    let mut pos = 0;
    let mut line = || -> std::result::Result<(usize, &str), DataError> {
        let start = pos;
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .ok_or_else(|| fmt(bytes.len(), "unterminated header line".into()))?;
        let text = std::str::from_utf8(&bytes[start..end])
            .map_err(|_| fmt(start, "header line is not UTF-8".into()))?;
        pos = end + 1;
        Ok((start, text))
    };

    let (off, magic) = line()?;
    if magic != ARTIFACT_MAGIC {
        return Err(fmt(off, format!("bad magic {magic:?}, expected {ARTIFACT_MAGIC:?}")));
    }
    let mut kind = None;
    let mut hash = None;
    let mut fields = BTreeMap::new();
    let count = loop {
        let (off, text) = line()?;
        let (k, v) = text
            .split_once('=')
            .ok_or_else(|| fmt(off, format!("expected key=value, found {text:?}")))?;
        match k {
            "kind" => kind = Some(v.to_string()),
            "hash" => hash = Some(v.to_string()),
            "data" => {
                break v
                    .parse::<usize>()
                    .map_err(|_| fmt(off, format!("bad payload count {v:?}")))?
            }
            _ => {
                fields.insert(k.to_string(), v.to_string());
            }
        }
    };
    let header = ArtifactHeader {
        kind: kind.ok_or_else(|| fmt(0, "missing kind line".into()))?,
        hash: hash.ok_or_else(|| fmt(0, "missing hash line".into()))?,
        fields,
    };
    if header.kind != expect_kind {
        return Err(fmt(0, format!("artifact kind {:?}, expected {expect_kind:?}", header.kind)));
    }
    let have = bytes.len() - pos;
    if have != count * 8 {
        return Err(fmt(pos, format!("payload promises {count} f64 ({} bytes), found {have}", count * 8)));
    }
    let payload = bytes[pos..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}

/// Peeks at an artifact's config hash without decoding the payload.
pub fn artifact_hash(path: &Path, expect_kind: &str) -> Result<String> {
    read_artifact(path, expect_kind).map(|(h, _)| h.hash)
}

// ---------------------------------------------------------- filter banks

pub fn save_banks(path: &Path, hash: &str, bank1: &FilterBank, bank2: &FilterBank) -> Result<()> {
    let mut payload = Vec::new();
    for bank in [bank1, bank2] {
        for f in &bank.filters {
            payload.extend_from_slice(f);
        }
        payload.extend_from_slice(&bank.eigenvalues);
    }
    let fields = vec![
        ("patch_side".to_string(), bank1.patch_side.to_string()),
        ("filters".to_string(), bank1.filters.len().to_string()),
    ];
    write_artifact(path, "filter_bank", hash, &fields, &payload)
}

pub fn load_banks(path: &Path) -> Result<(String, FilterBank, FilterBank)> {
    let (header, payload) = read_artifact(path, "filter_bank")?;
    let k = header.get_usize(path, "patch_side")?;
    let l = header.get_usize(path, "filters")?;
    let per_bank = l * k * k + l;
    if payload.len() != 2 * per_bank {
        return Err(DataError::Invalid(format!(
            "{}: payload length {} does not match 2 banks of {l} {k}x{k} filters",
            path.display(),
            payload.len()
        )));
    }
    let mut take = payload.into_iter();
    let mut bank = |stage: u8| {
        let filters: Vec<Vec<f64>> = (0..l).map(|_| take.by_ref().take(k * k).collect()).collect();
        let eigenvalues: Vec<f64> = take.by_ref().take(l).collect();
        FilterBank { stage, patch_side: k, filters, eigenvalues }
    };
    Ok((header.hash, bank(1), bank(2)))
}

// ------------------------------------------------------------------ LSTM

pub fn save_lstm(path: &Path, hash: &str, params: &LstmParams) -> Result<()> {
    let mut payload =
        Vec::with_capacity(params.w.len() + params.b.len() + params.w_y.len() + params.b_y.len());
    payload.extend_from_slice(&params.w);
    payload.extend_from_slice(&params.b);
    payload.extend_from_slice(&params.w_y);
    payload.extend_from_slice(&params.b_y);
    let fields = vec![
        ("input_dim".to_string(), params.input_dim.to_string()),
        ("hidden".to_string(), params.hidden_dim.to_string()),
        ("classes".to_string(), params.n_classes.to_string()),
    ];
    write_artifact(path, "lstm", hash, &fields, &payload)
}

pub fn load_lstm(path: &Path) -> Result<(String, LstmParams)> {
    let (header, payload) = read_artifact(path, "lstm")?;
    let d = header.get_usize(path, "input_dim")?;
    let h = header.get_usize(path, "hidden")?;
    let c = header.get_usize(path, "classes")?;
    let sizes = [(d + h) * 4 * h, 4 * h, h * c, c];
    if payload.len() != sizes.iter().sum::<usize>() {
        return Err(DataError::Invalid(format!("{}: payload does not match dims", path.display())));
    }
    let mut take = payload.into_iter();
    let mut grab = |n: usize| take.by_ref().take(n).collect::<Vec<f64>>();
    Ok((
        header.hash,
        LstmParams {
            input_dim: d,
            hidden_dim: h,
            n_classes: c,
            w: grab(sizes[0]),
            b: grab(sizes[1]),
            w_y: grab(sizes[2]),
            b_y: grab(sizes[3]),
        },
    ))
}

// ------------------------------------------------------------------ HMMs

pub fn save_models(path: &Path, hash: &str, models: &ModelSet, dim: usize) -> Result<()> {
    let mut fields = vec![
        ("dim".to_string(), dim.to_string()),
        ("words".to_string(), models.words().len().to_string()),
    ];
    let mut payload = Vec::new();
    for (i, hmm) in models.words().iter().enumerate() {
        let comps: Vec<String> =
            hmm.states().iter().map(|g| g.n_components().to_string()).collect();
        fields.push((
            format!("word.{i}"),
            format!("{}:{}:{}", hmm.word(), hmm.n_states(), comps.join(",")),
        ));
        for gmm in hmm.states() {
            payload.extend_from_slice(gmm.weights());
            payload.extend_from_slice(gmm.means().data());
            payload.extend_from_slice(gmm.variances().data());
        }
        payload.extend_from_slice(hmm.log_trans().data());
    }
    write_artifact(path, "hmm_set", hash, &fields, &payload)
}

pub fn load_models(path: &Path) -> Result<(String, ModelSet, usize)> {
    let (header, payload) = read_artifact(path, "hmm_set")?;
    let bad = |what: String| DataError::Invalid(format!("{}: {what}", path.display()));
    let dim = header.get_usize(path, "dim")?;
    let n_words = header.get_usize(path, "words")?;

    let mut take = payload.into_iter();
    let mut grab = |n: usize| take.by_ref().take(n).collect::<Vec<f64>>();
    let mut words = Vec::with_capacity(n_words);
    for i in 0..n_words {
        let spec = header.get(path, &format!("word.{i}"))?;
        let mut parts = spec.splitn(3, ':');
        let (Some(name), Some(states), Some(comps)) = (parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(format!("word.{i} is not name:states:comps")));
        };
        let n_states: usize =
            states.parse().map_err(|_| bad(format!("word.{i}: bad state count {states:?}")))?;
        let comps: Vec<usize> = comps
            .split(',')
            .map(|c| c.parse().map_err(|_| bad(format!("word.{i}: bad component count {c:?}"))))
            .collect::<Result<_>>()?;
        if comps.len() != n_states {
            return Err(bad(format!("word.{i}: {} component counts for {n_states} states", comps.len())));
        }
        let mut states = Vec::with_capacity(n_states);
        for &k in &comps {
            let weights = grab(k);
            let means = Mat::from_vec(k, dim, grab(k * dim));
            let variances = Mat::from_vec(k, dim, grab(k * dim));
            states.push(
                GaussianMixture::new(weights, means, variances)
                    .map_err(|e| bad(format!("word.{i}: {e}")))?,
            );
        }
        let side = n_states + 2;
        let trans = grab(side * side);
        if trans.len() != side * side {
            return Err(bad("payload ends before transition matrix".into()));
        }
        let log_trans = Mat::from_vec(side, side, trans);
        words.push(
            WordHmm::from_parts(name.to_string(), states, log_trans)
                .map_err(|e| bad(format!("word.{i}: {e}")))?,
        );
    }
    let models = ModelSet::new(words).map_err(|e| bad(e.to_string()))?;
    Ok((header.hash, models, dim))
}

// ------------------------------------------------------- directory meta

/// Provenance sidecar for stage output directories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirMeta {
    pub stage: String,
    pub config_hash: String,
    pub tag: String,
    pub dim: usize,
}

pub fn write_meta(dir: &Path, meta: &DirMeta) -> Result<()> {
    let path = dir.join(META_FILE);
    fs::write(&path, toml::to_string(meta).expect("meta serializes"))
        .map_err(|e| DataError::Io { path, source: e })
}

pub fn read_meta(dir: &Path) -> Result<Option<DirMeta>> {
    let path = dir.join(META_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(DataError::Io { path, source: e }),
    };
    toml::from_str(&text).map_err(|e| DataError::Invalid(format!("{}: {e}", path.display())))
}

pub fn meta_path(dir: &Path) -> PathBuf {
    dir.join(META_FILE)
}
