use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    /// Exclusive.
    pub end: usize,
    pub label: usize,
}

/// Per-frame labels plus their run-length encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segmentation {
    pub n_frames: usize,
    pub frame_labels: Vec<usize>,
    pub segments: Vec<Segment>,
}

impl Segmentation {
    pub fn from_labels(frame_labels: Vec<usize>) -> Self {
        let segments = run_length(&frame_labels);
        Self {
            n_frames: frame_labels.len(),
            frame_labels,
            segments,
        }
    }

    /// Number of distinct labels that receive at least one frame.
    pub fn distinct_labels(&self) -> usize {
        let mut l = self.frame_labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }
}

/// Maximal runs of equal labels.
pub fn run_length<T: Copy + PartialEq + Into<usize>>(labels: &[T]) -> Vec<Segment> {
    let mut out: Vec<Segment> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        match out.last_mut() {
            Some(s) if s.label == l.into() => s.end = i + 1,
            _ => out.push(Segment {
                start: i,
                end: i + 1,
                label: l.into(),
            }),
        }
    }
    out
}

/// Splits `0..n` into `m` contiguous spans; the first `n % m` spans get one extra frame.
pub fn uniform_spans(n: usize, m: usize) -> Result<Vec<Range<usize>>> {
    if m == 0 {
        return Err(Error::Argument("number of segments must be >= 1".into()));
    }
    if n < m {
        return Err(Error::Argument(format!(
            "cannot split {n} frames into {m} segments"
        )));
    }
    let base = n / m;
    let extra = n % m;
    let mut start = 0;
    Ok((0..m)
        .map(|j| {
            let len = base + usize::from(j < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect())
}
