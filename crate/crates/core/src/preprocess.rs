//! Feature-file ingestion, per-frame L2 normalization and temporal Gaussian
//! smoothing.
//!
//! Feature files are UTF-8 text with one frame per line and values separated
//! by commas and/or whitespace. Label files hold one token per line: integer
//! tokens are used as-is, other tokens are interned to unused integers in
//! order of first appearance.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFeatures {
    pub name: String,
    /// N x D, one frame per row.
    pub frames: Matrix,
    pub labels: Option<Vec<i64>>,
    /// Original tokens of interned (non-integer) labels.
    pub label_names: Vec<(i64, String)>,
    pub fps: Option<f64>,
}

impl VideoFeatures {
    pub fn new(name: impl Into<String>, frames: Matrix, labels: Option<Vec<i64>>) -> Result<Self> {
        if frames.rows() == 0 || frames.cols() == 0 {
            return Err(Error::Argument(format!(
                "a video needs at least one frame and one feature, got {}x{}",
                frames.rows(),
                frames.cols()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != frames.rows() {
                return Err(Error::Consistency(format!(
                    "{} labels for {} frames",
                    l.len(),
                    frames.rows()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            frames,
            labels,
            label_names: Vec::new(),
            fps: None,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    /// Resolves a label given either as an integer or as an interned token.
    pub fn resolve_label(&self, token: &str) -> Option<i64> {
        token.trim().parse::<i64>().ok().or_else(|| {
            self.label_names
                .iter()
                .find(|(_, n)| n == token.trim())
                .map(|(id, _)| *id)
        })
    }
}

fn parse_row(line: &str) -> std::result::Result<Vec<f64>, String> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("not a number: {t:?}"))
                .and_then(|v| {
                    if v.is_finite() {
                        Ok(v)
                    } else {
                        Err(format!("non-finite value {t:?}"))
                    }
                })
        })
        .collect()
}

/// Parses a text feature matrix. `origin` is used in error messages.
pub fn parse_features(text: &str, origin: &str) -> Result<Matrix> {
    let mut cols = None;
    let mut data = Vec::new();
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            path: origin.to_string(),
            line: lineno + 1,
            msg,
        };
        let row = parse_row(line).map_err(perr)?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(perr(format!("expected {c} values, found {}", row.len())));
            }
            _ => {}
        }
        data.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse {
        path: origin.to_string(),
        line: 0,
        msg: "no frames".into(),
    })?;
    Matrix::from_vec(rows, cols, data)
}

/// Parses label tokens, returning ids and the names of interned tokens.
pub fn parse_labels(text: &str) -> (Vec<i64>, Vec<(i64, String)>) {
    let tokens: Vec<&str> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    let used: BTreeSet<i64> = tokens.iter().filter_map(|t| t.parse().ok()).collect();
    let mut interned: HashMap<&str, i64> = HashMap::new();
    let mut names = Vec::new();
    let mut next = 0i64;
    let ids = tokens
        .iter()
        .map(|&t| {
            if let Ok(v) = t.parse::<i64>() {
                return v;
            }
            *interned.entry(t).or_insert_with(|| {
                while used.contains(&next) {
                    next += 1;
                }
                let id = next;
                next += 1;
                names.push((id, t.to_string()));
                id
            })
        })
        .collect();
    (ids, names)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}

/// Loads a feature file and an optional label file.
pub fn load_features(path: &Path, labels_path: Option<&Path>) -> Result<VideoFeatures> {
    let text = read_text(path)?;
    let frames = parse_features(&text, &path.display().to_string())?;
    let name = video_name(path);
    let mut v = VideoFeatures::new(name, frames, None)?;
    if let Some(lp) = labels_path {
        let (ids, names) = parse_labels(&read_text(lp)?);
        if ids.len() != v.n_frames() {
            return Err(Error::Consistency(format!(
                "{} has {} labels but {} has {} frames",
                lp.display(),
                ids.len(),
                path.display(),
                v.n_frames()
            )));
        }
        v.labels = Some(ids);
        v.label_names = names;
    }
    Ok(v)
}

/// File stem with a trailing `.features` removed.
pub fn video_name(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    stem.strip_suffix(".features").map(str::to_string).unwrap_or(stem)
}

/// Comma-separated rows; values use the shortest representation that
/// parses back to the same `f64`.
pub fn format_features(m: &Matrix) -> String {
    let mut out = String::with_capacity(m.rows() * m.cols() * 4);
    for row in m.row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn format_labels(labels: &[i64]) -> String {
    let mut out = String::with_capacity(labels.len() * 3);
    for l in labels {
        writeln!(out, "{l}").unwrap();
    }
    out
}

pub fn write_features(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, format_features(m))?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &[i64]) -> Result<()> {
    fs::write(path, format_labels(labels))?;
    Ok(())
}

/// Scales every frame to unit Euclidean norm.
pub fn l2_normalize_rows(v: &VideoFeatures) -> Result<VideoFeatures> {
    let mut out = v.clone();
    for i in 0..out.frames.rows() {
        let row = out.frames.row_mut(i);
        let n = dot(row, row).sqrt();
        if n == 0.0 {
            return Err(Error::DegenerateInput(format!(
                "frame {i} of {} is all zeros and cannot be normalized",
                v.name
            )));
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

/// Smoothing window length in frames: `max(1, round(s * n / m))`.
pub fn smoothing_window(s: f64, n: usize, m: usize) -> usize {
    ((s * n as f64 / m.max(1) as f64).round() as usize).max(1)
}

/// Normalized Gaussian taps for a window of `w` frames: `2 * (w / 2) + 1`
/// taps (so even windows get the next odd size), `sigma = w / 4`.
pub fn gaussian_taps(w: usize) -> Vec<f64> {
    let r = (w / 2) as i64;
    if r == 0 {
        return vec![1.0];
    }
    let sigma = w as f64 / 4.0;
    let raw: Vec<f64> = (-r..=r)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Maps an out-of-range index back into `0..n` by mirroring about the
/// sequence ends (`-1 -> 0`, `n -> n - 1`).
pub fn reflect_index(j: i64, n: usize) -> usize {
    let n = n as i64;
    let p = j.rem_euclid(2 * n);
    (if p < n { p } else { 2 * n - 1 - p }) as usize
}

/// Gaussian smoothing along time with a window of about `s * N / m` frames.
pub fn temporal_smooth(v: &VideoFeatures, s: f64, m: usize) -> Result<VideoFeatures> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Argument(format!("smoothing factor must be > 0, got {s}")));
    }
    if m == 0 {
        return Err(Error::Argument("number of segments must be >= 1".into()));
    }
    let n = v.n_frames();
    let taps = gaussian_taps(smoothing_window(s, n, m));
    if taps.len() == 1 {
        return Ok(v.clone());
    }
    let r = (taps.len() / 2) as i64;
    let d = v.dim();
    let frames = &v.frames;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; d];
            for (k, w) in taps.iter().enumerate() {
                let src = frames.row(reflect_index(i as i64 + k as i64 - r, n));
                acc.iter_mut().zip(src).for_each(|(a, x)| *a += w * x);
            }
            acc
        })
        .collect();
    let mut out = v.clone();
    out.frames = Matrix::from_vec(n, d, rows.concat())?;
    Ok(out)
}

/// Preprocessing applied before training: smoothing first, then optional normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    /// Smoothing factor `s`; 0 disables smoothing.
    pub smooth: f64,
    pub normalize: bool,
}

impl Preprocess {
    pub const OFF: Preprocess = Preprocess {
        smooth: 0.0,
        normalize: false,
    };

    pub fn apply(&self, v: &VideoFeatures, m: usize) -> Result<VideoFeatures> {
        let mut out = if self.smooth > 0.0 {
            temporal_smooth(v, self.smooth, m)?
        } else {
            v.clone()
        };
        if self.normalize {
            out = l2_normalize_rows(&out)?;
        }
        Ok(out)
    }
}
