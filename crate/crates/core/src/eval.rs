//! Matching predicted segment ids to ground-truth classes and the frame-level
//! metrics computed under that matching.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::segmentation::Segmentation;

/// Cost values the assignment solver can work with: an ordered group under
/// addition with a large sentinel.
pub trait AssignCost: Copy + PartialOrd + Add<Output = Self> + Sub<Output = Self> {
    const ZERO: Self;
    const INF: Self;
}

impl AssignCost for i64 {
    const ZERO: i64 = 0;
    const INF: i64 = i64::MAX / 4;
}

/// Lexicographic cost: the integer part decides, the float parts only break ties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexCost(pub i64, pub f64, pub f64);

impl PartialOrd for LexCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(
            self.0
                .cmp(&other.0)
                .then(self.1.total_cmp(&other.1))
                .then(self.2.total_cmp(&other.2)),
        )
    }
}

impl Add for LexCost {
    type Output = LexCost;
    fn add(self, o: LexCost) -> LexCost {
        LexCost(self.0 + o.0, self.1 + o.1, self.2 + o.2)
    }
}

impl Sub for LexCost {
    type Output = LexCost;
    fn sub(self, o: LexCost) -> LexCost {
        LexCost(self.0 - o.0, self.1 - o.1, self.2 - o.2)
    }
}

impl AssignCost for LexCost {
    const ZERO: LexCost = LexCost(0, 0.0, 0.0);
    const INF: LexCost = LexCost(i64::MAX / 4, 0.0, 0.0);
}

/// Optimal assignment on a square integer cost matrix (minimization).
///
/// Returns `col[i]`, the column assigned to row `i`.
pub fn hungarian_min(cost: &[Vec<i64>]) -> Vec<usize> {
    assignment_min(cost)
}

/// Potentials-based O(n³) shortest augmenting path over any [`AssignCost`].
pub fn assignment_min<T: AssignCost>(cost: &[Vec<T>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(cost.iter().all(|r| r.len() == n), "cost matrix must be square");
    // 1-based arrays; index 0 is the virtual source.
    let mut u = vec![T::ZERO; n + 1];
    let mut v = vec![T::ZERO; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![T::INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = T::INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            col[p[j] - 1] = j - 1;
        }
    }
    col
}

/// Predicted id -> ground-truth class; `None` for predicted ids left unmatched.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub entries: BTreeMap<usize, Option<i64>>,
    /// Frames on which the matched labels agree.
    pub total_overlap: usize,
}

impl LabelMap {
    pub fn get(&self, pred: usize) -> Option<i64> {
        self.entries.get(&pred).copied().flatten()
    }
}

fn check_lengths(pred: &[usize], gt: &[i64]) -> Result<()> {
    if pred.len() != gt.len() {
        return Err(Error::Consistency(format!(
            "{} predicted labels vs {} ground-truth labels",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Argument("cannot evaluate an empty sequence".into()));
    }
    Ok(())
}

/// One-to-one matching of predicted ids to ground-truth classes maximizing
/// the number of agreeing frames. Frames of `exclude_gt` are dropped first.
///
/// Among matchings with the same overlap the one with the largest IoU sum
/// wins, then the largest F1 sum, so the metrics do not depend on how the
/// predicted ids happen to be numbered.
pub fn hungarian_match(pred: &[usize], gt: &[i64], exclude_gt: Option<i64>) -> Result<LabelMap> {
    check_lengths(pred, gt)?;
    let kept: Vec<(usize, i64)> = pred
        .iter()
        .zip(gt)
        .filter(|(_, &g)| Some(g) != exclude_gt)
        .map(|(&p, &g)| (p, g))
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyEval(exclude_gt.unwrap_or_default()));
    }
    let mut pred_ids: Vec<usize> = pred.to_vec();
    pred_ids.sort_unstable();
    pred_ids.dedup();
    let mut gt_ids: Vec<i64> = kept.iter().map(|&(_, g)| g).collect();
    gt_ids.sort_unstable();
    gt_ids.dedup();

    let size = pred_ids.len().max(gt_ids.len());
    let mut overlap = vec![vec![0i64; size]; size];
    for &(p, g) in &kept {
        let r = pred_ids.binary_search(&p).unwrap();
        let c = gt_ids.binary_search(&g).unwrap();
        overlap[r][c] += 1;
    }
    let pred_sizes: Vec<i64> = overlap.iter().map(|r| r.iter().sum()).collect();
    let gt_sizes: Vec<i64> = (0..size).map(|c| overlap.iter().map(|r| r[c]).sum()).collect();
    let max = overlap.iter().flatten().copied().max().unwrap_or(0);
    let cost: Vec<Vec<LexCost>> = overlap
        .iter()
        .enumerate()
        .map(|(r, row)| {
            row.iter()
                .enumerate()
                .map(|(c, &o)| {
                    let (pn, gn) = (pred_sizes[r], gt_sizes[c]);
                    let (iou, f1) = if o == 0 {
                        (0.0, 0.0)
                    } else {
                        (o as f64 / (pn + gn - o) as f64, 2.0 * o as f64 / (pn + gn) as f64)
                    };
                    LexCost(max - o, -iou, -f1)
                })
                .collect()
        })
        .collect();
    let col = assignment_min(&cost);

    let mut entries = BTreeMap::new();
    let mut total = 0usize;
    for (r, &p) in pred_ids.iter().enumerate() {
        let c = col[r];
        let g = gt_ids.get(c).copied();
        entries.insert(p, g);
        if g.is_some() {
            total += overlap[r][c] as usize;
        }
    }
    Ok(LabelMap {
        entries,
        total_overlap: total,
    })
}

fn evaluated<'a>(pred: &'a [usize], gt: &'a [i64], exclude_gt: Option<i64>) -> impl Iterator<Item = (usize, i64)> + 'a {
    pred.iter()
        .zip(gt)
        .filter(move |(_, &g)| Some(g) != exclude_gt)
        .map(|(&p, &g)| (p, g))
}

/// Fraction of evaluated frames whose mapped label equals the ground truth.
pub fn mof(pred: &[usize], gt: &[i64], map: &LabelMap, exclude_gt: Option<i64>) -> f64 {
    let (mut hit, mut total) = (0usize, 0usize);
    for (p, g) in evaluated(pred, gt, exclude_gt) {
        total += 1;
        if map.get(p) == Some(g) {
            hit += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hit as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub class: i64,
    pub gt_frames: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
}

/// Per ground-truth class precision, recall, F1 and IoU under the map.
pub fn per_class_scores(pred: &[usize], gt: &[i64], map: &LabelMap, exclude_gt: Option<i64>) -> Vec<ClassScores> {
    // class -> (|pred mapped to class|, |gt|, |intersection|)
    let mut counts: BTreeMap<i64, (usize, usize, usize)> = BTreeMap::new();
    for (_, g) in evaluated(pred, gt, exclude_gt) {
        counts.entry(g).or_default();
    }
    for (p, g) in evaluated(pred, gt, exclude_gt) {
        counts.get_mut(&g).unwrap().1 += 1;
        if let Some(mp) = map.get(p) {
            if let Some(c) = counts.get_mut(&mp) {
                c.0 += 1;
                if mp == g {
                    c.2 += 1;
                }
            }
        }
    }
    counts
        .into_iter()
        .map(|(class, (np, ng, ni))| {
            let precision = if np == 0 { 0.0 } else { ni as f64 / np as f64 };
            let recall = ni as f64 / ng as f64;
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            let union = np + ng - ni;
            ClassScores {
                class,
                gt_frames: ng,
                precision,
                recall,
                f1,
                iou: ni as f64 / union as f64,
            }
        })
        .collect()
}

fn mean_of(scores: &[ClassScores], f: impl Fn(&ClassScores) -> f64) -> f64 {
    if scores.is_empty() {
        0.0
    } else {
        scores.iter().map(f).sum::<f64>() / scores.len() as f64
    }
}

/// Unweighted mean over present ground-truth classes of `|P ∩ G| / |P ∪ G|`.
pub fn iou(pred: &[usize], gt: &[i64], map: &LabelMap, exclude_gt: Option<i64>) -> f64 {
    mean_of(&per_class_scores(pred, gt, map, exclude_gt), |c| c.iou)
}

/// Unweighted mean over present ground-truth classes of per-class F1.
pub fn f1(pred: &[usize], gt: &[i64], map: &LabelMap, exclude_gt: Option<i64>) -> f64 {
    mean_of(&per_class_scores(pred, gt, map, exclude_gt), |c| c.f1)
}

/// Indices `i > 0` where the label changes.
pub fn boundaries<T: PartialEq>(labels: &[T]) -> Vec<usize> {
    (1..labels.len()).filter(|&i| labels[i] != labels[i - 1]).collect()
}

/// Fraction of ground-truth boundaries matched by a predicted boundary within
/// `tolerance` frames. Ground-truth boundaries are visited in increasing
/// order and each takes the nearest unused predicted boundary (earlier one on
/// ties). 1.0 when the ground truth has no boundaries.
pub fn boundary_accuracy<P: PartialEq, G: PartialEq>(pred: &[P], gt: &[G], tolerance: usize) -> f64 {
    let gb = boundaries(gt);
    if gb.is_empty() {
        return 1.0;
    }
    let pb = boundaries(pred);
    let mut used = vec![false; pb.len()];
    let mut detected = 0usize;
    for &g in &gb {
        let lo = pb.partition_point(|&p| p + tolerance < g);
        let mut best: Option<usize> = None;
        for k in lo..pb.len() {
            if pb[k] > g + tolerance {
                break;
            }
            if !used[k] && best.is_none_or(|b| pb[k].abs_diff(g) < pb[b].abs_diff(g)) {
                best = Some(k);
            }
        }
        if let Some(k) = best {
            used[k] = true;
            detected += 1;
        }
    }
    detected as f64 / gb.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub exclude_gt: Option<i64>,
    /// `None` skips boundary accuracy.
    pub boundary_tolerance: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            exclude_gt: None,
            boundary_tolerance: Some(3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMapEntry {
    pub pred: usize,
    pub gt: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub video: String,
    pub n_frames: usize,
    pub n_evaluated: usize,
    pub mof: f64,
    pub iou: f64,
    pub f1: f64,
    pub boundary_accuracy: Option<f64>,
    pub boundary_tolerance: Option<usize>,
    pub label_map: Vec<LabelMapEntry>,
    pub per_class: Vec<ClassScores>,
    pub excluded_background: Option<i64>,
}

/// Matching plus every metric.
pub fn evaluate(video: &str, seg: &Segmentation, gt: &[i64], opts: &EvalOptions) -> Result<EvalReport> {
    let pred = &seg.frame_labels;
    check_lengths(pred, gt)?;
    let map = hungarian_match(pred, gt, opts.exclude_gt)?;
    let per_class = per_class_scores(pred, gt, &map, opts.exclude_gt);
    let n_evaluated = gt.iter().filter(|&&g| Some(g) != opts.exclude_gt).count();
    Ok(EvalReport {
        video: video.to_string(),
        n_frames: gt.len(),
        n_evaluated,
        mof: mof(pred, gt, &map, opts.exclude_gt),
        iou: mean_of(&per_class, |c| c.iou),
        f1: mean_of(&per_class, |c| c.f1),
        boundary_accuracy: opts
            .boundary_tolerance
            .map(|t| boundary_accuracy(pred, gt, t)),
        boundary_tolerance: opts.boundary_tolerance,
        label_map: map
            .entries
            .iter()
            .map(|(&pred, &gt)| LabelMapEntry { pred, gt })
            .collect(),
        per_class,
        excluded_background: opts.exclude_gt,
    })
}

/// Unweighted per-video means of (mof, iou, f1, boundary accuracy).
pub fn aggregate(reports: &[EvalReport]) -> (f64, f64, f64, Option<f64>) {
    let n = reports.len().max(1) as f64;
    let m = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let ba: Option<Vec<f64>> = reports.iter().map(|r| r.boundary_accuracy).collect();
    (
        m(&|r| r.mof),
        m(&|r| r.iou),
        m(&|r| r.f1),
        ba.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64),
    )
}
