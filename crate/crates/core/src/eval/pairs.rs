//! Pair-verification protocol: "refA refB same|diff" lists over an image
//! directory, thresholded on encoding distance.

use std::collections::HashMap;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingestion::load_image_path;
use crate::vision::{detect_faces, encode_face, face_distance, DetectorConfig, DetectorModel, FaceEncoding};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairEntry {
    pub a: PathBuf,
    pub b: PathBuf,
    pub same: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairList {
    pub entries: Vec<PairEntry>,
}

/// Parse a pair list, resolving references against `image_root`. Blank
/// lines and lines starting with `#` are ignored.
pub fn parse_pairs(text: &str, image_root: &Path) -> Result<PairList, EvalError> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse_err = |message: String| EvalError::Parse {
            line: line_no,
            message,
        };
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 fields, found {}", fields.len())));
        }
        let same = match fields[2] {
            "same" => true,
            "diff" => false,
            other => return Err(parse_err(format!("expected same|diff, found {other:?}"))),
        };
        let resolve = |r: &str| -> Result<PathBuf, EvalError> {
            let rel = Path::new(r);
            if !rel.components().all(|c| matches!(c, Component::Normal(_) | Component::CurDir)) {
                return Err(parse_err(format!("image reference {r:?} leaves the image root")));
            }
            let path = image_root.join(rel);
            if !path.is_file() {
                return Err(EvalError::MissingImage(path));
            }
            Ok(path)
        };
        entries.push(PairEntry {
            a: resolve(fields[0])?,
            b: resolve(fields[1])?,
            same,
        });
    }
    if entries.is_empty() {
        return Err(EvalError::Parse {
            line: 0,
            message: "no pairs".into(),
        });
    }
    Ok(PairList { entries })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub a: PathBuf,
    pub b: PathBuf,
    pub same: bool,
    /// Absent when either image yielded no encodable face.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Pairs that were scored.
    pub n_pairs: usize,
    pub n_same: usize,
    pub n_diff: usize,
    pub skipped_pairs: usize,
    pub accuracy: f64,
    pub best_threshold: f64,
    /// One point per distinct observed distance, thresholds ascending.
    pub roc: Vec<RocPoint>,
    pub mean_same_distance: Option<f64>,
    pub mean_diff_distance: Option<f64>,
    pub pairs: Vec<PairResult>,
}

impl VerificationReport {
    /// `threshold,tpr,fpr` lines after a header.
    pub fn roc_csv(&self) -> String {
        let mut out = String::from("threshold,tpr,fpr\n");
        for p in &self.roc {
            out.push_str(&format!("{},{},{}\n", p.threshold, p.tpr, p.fpr));
        }
        out
    }
}

/// Accuracy at threshold `t`: same pairs at distance <= t plus different
/// pairs beyond t, over all scored pairs.
pub fn accuracy_at(scored: &[(f64, bool)], t: f64) -> f64 {
    let right = scored.iter().filter(|(d, same)| (*d <= t) == *same).count();
    right as f64 / scored.len() as f64
}

/// Threshold sweep over the scored `(distance, same)` pairs. The best
/// threshold is the smallest observed distance with the highest accuracy.
pub fn sweep(scored: &[(f64, bool)]) -> (Vec<RocPoint>, f64, f64) {
    let mut thresholds: Vec<f64> = scored.iter().map(|(d, _)| *d).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let n_same = scored.iter().filter(|(_, s)| *s).count();
    let n_diff = scored.len() - n_same;
    let rate = |hits: usize, total: usize| if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    let mut roc = Vec::with_capacity(thresholds.len());
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &t in &thresholds {
        let tp = scored.iter().filter(|(d, s)| *s && *d <= t).count();
        let fp = scored.iter().filter(|(d, s)| !*s && *d <= t).count();
        roc.push(RocPoint {
            threshold: t,
            tpr: rate(tp, n_same),
            fpr: rate(fp, n_diff),
        });
        let acc = accuracy_at(scored, t);
        if acc > best.0 {
            best = (acc, t);
        }
    }
    (roc, best.1, best.0)
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Encode the highest-scoring face of each image once, score every pair
/// and sweep thresholds. Pairs with an undetected face are skipped.
pub fn eval_pairs(
    pairs: &PairList,
    model: &DetectorModel,
    config: &DetectorConfig,
) -> Result<VerificationReport, EvalError> {
    let mut cache: HashMap<&Path, Option<FaceEncoding>> = HashMap::new();
    for e in &pairs.entries {
        for path in [&e.a, &e.b] {
            if cache.contains_key(path.as_path()) {
                continue;
            }
            let image = load_image_path(path).map_err(|source| EvalError::Decode {
                path: path.clone(),
                source,
            })?;
            let encoding = detect_faces(&image, model, config)?
                .first()
                .and_then(|b| encode_face(&image, b, config).ok());
            cache.insert(path.as_path(), encoding);
        }
    }
    let mut results = Vec::with_capacity(pairs.entries.len());
    for e in &pairs.entries {
        let distance = match (&cache[e.a.as_path()], &cache[e.b.as_path()]) {
            (Some(x), Some(y)) => Some(face_distance(x, y)?),
            _ => None,
        };
        results.push(PairResult {
            a: e.a.clone(),
            b: e.b.clone(),
            same: e.same,
            distance,
        });
    }
    let scored: Vec<(f64, bool)> = results.iter().filter_map(|r| r.distance.map(|d| (d, r.same))).collect();
    if scored.is_empty() {
        return Err(EvalError::NoUsablePairs);
    }
    let (roc, best_threshold, accuracy) = sweep(&scored);
    Ok(VerificationReport {
        n_pairs: scored.len(),
        n_same: scored.iter().filter(|(_, s)| *s).count(),
        n_diff: scored.iter().filter(|(_, s)| !*s).count(),
        skipped_pairs: results.len() - scored.len(),
        accuracy,
        best_threshold,
        roc,
        mean_same_distance: mean(scored.iter().filter(|(_, s)| *s).map(|(d, _)| *d)),
        mean_diff_distance: mean(scored.iter().filter(|(_, s)| !*s).map(|(d, _)| *d)),
        pairs: results,
    })
}
