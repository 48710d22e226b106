//! Comparison baselines: uniform splitting, k-means on frames, and k-means
//! centers assigned in kernel space.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::learner::{assign_by_kernel, resolve_kernel, segment_video, Approximation, TrainConfig};
use crate::numerics::{sqdist, Matrix, Rng};
use crate::preprocess::{Preprocess, VideoFeatures};
use crate::segmentation::{uniform_spans, Segmentation};

pub const DEFAULT_KMEANS_ITERS: usize = 100;
// Rng substream of the training seed used for k-means seeding.
const STREAM_KMEANS: u64 = 5;

/// `m` contiguous spans of near-equal length, span `j` labeled `j`.
pub fn uniform_segmentation(n: usize, m: usize) -> Result<Segmentation> {
    let spans = uniform_spans(n, m)?;
    let mut labels = Vec::with_capacity(n);
    for (j, s) in spans.into_iter().enumerate() {
        labels.extend(std::iter::repeat_n(j, s.len()));
    }
    Ok(Segmentation::from_labels(labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Matrix,
    pub labels: Vec<usize>,
    /// Within-cluster sum of squares after seeding, then after every
    /// assignment and every update step.
    pub inertia_history: Vec<f64>,
}

fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    centroids
        .row_iter()
        .enumerate()
        .map(|(j, c)| (j, sqdist(x, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn inertia(frames: &Matrix, centroids: &Matrix, labels: &[usize]) -> f64 {
    frames
        .row_iter()
        .zip(labels)
        .map(|(x, &l)| sqdist(x, centroids.row(l)))
        .sum()
}

fn kmeans_pp(frames: &Matrix, m: usize, rng: &mut Rng) -> Matrix {
    let n = frames.rows();
    let mut chosen = vec![rng.index(n)];
    let mut d2: Vec<f64> = frames
        .row_iter()
        .map(|x| sqdist(x, frames.row(chosen[0])))
        .collect();
    while chosen.len() < m {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all remaining points coincide with a center; take the first unused one
            (0..n).find(|i| !chosen.contains(i)).unwrap_or(0)
        } else {
            let mut r = rng.uniform() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            pick
        };
        chosen.push(next);
        for (i, x) in frames.row_iter().enumerate() {
            d2[i] = d2[i].min(sqdist(x, frames.row(next)));
        }
    }
    frames.select_rows(&chosen)
}

/// Lloyd's algorithm with k-means++ seeding. Empty clusters are re-seeded at
/// the point farthest from its centroid.
pub fn kmeans(frames: &Matrix, m: usize, rng: &mut Rng, iters: usize) -> Result<KMeansResult> {
    let n = frames.rows();
    if m == 0 || n < m {
        return Err(Error::Argument(format!(
            "k-means needs 1 <= m <= N, got m = {m}, N = {n}"
        )));
    }
    let mut centroids = kmeans_pp(frames, m, rng);
    let mut labels: Vec<usize> = frames.row_iter().map(|x| nearest(x, &centroids).0).collect();
    let mut history = vec![inertia(frames, &centroids, &labels)];

    for _ in 0..iters {
        // update
        let d = frames.cols();
        let mut sums = Matrix::zeros(m, d);
        let mut counts = vec![0usize; m];
        for (x, &l) in frames.row_iter().zip(&labels) {
            counts[l] += 1;
            sums.row_mut(l).iter_mut().zip(x).for_each(|(s, v)| *s += v);
        }
        for j in 0..m {
            if counts[j] > 0 {
                let c = counts[j] as f64;
                let row = sums.row(j).iter().map(|s| s / c).collect::<Vec<_>>();
                centroids.row_mut(j).copy_from_slice(&row);
            }
        }
        for j in 0..m {
            if counts[j] == 0 {
                let far = (0..n)
                    .map(|i| (i, sqdist(frames.row(i), centroids.row(labels[i]))))
                    .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b })
                    .0;
                let row = frames.row(far).to_vec();
                centroids.row_mut(j).copy_from_slice(&row);
                counts[labels[far]] -= 1;
                labels[far] = j;
                counts[j] = 1;
            }
        }
        history.push(inertia(frames, &centroids, &labels));

        // assignment
        let new_labels: Vec<usize> = frames
            .row_iter()
            .zip(&labels)
            .map(|(x, &old)| {
                let (j, dj) = nearest(x, &centroids);
                // keep the current label on ties so the objective cannot move up
                if dj < sqdist(x, centroids.row(old)) {
                    j
                } else {
                    old
                }
            })
            .collect();
        let changed = new_labels != labels;
        labels = new_labels;
        history.push(inertia(frames, &centroids, &labels));
        if !changed {
            break;
        }
    }
    Ok(KMeansResult {
        centroids,
        labels,
        inertia_history: history,
    })
}

/// Frames labeled by their nearest k-means centroid in L2.
pub fn kmeans_segmentation(frames: &Matrix, m: usize, rng: &mut Rng, iters: usize) -> Result<Segmentation> {
    Ok(Segmentation::from_labels(kmeans(frames, m, rng, iters)?.labels))
}

/// k-means centroids used as prototypes, with frames assigned by kernel similarity.
pub fn kernel_kmeans_assign(frames: &Matrix, centers: &Matrix, spec: &KernelSpec) -> Result<Segmentation> {
    assign_by_kernel(frames, centers, spec)
}

/// Segmentation methods selectable from the front ends. The kernel-space
/// assignment of the uniform initialization is `Ours` with training off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Ours,
    Uniform,
    Kmeans,
    KernelKmeans,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Uniform => "uniform",
            Method::Kmeans => "kmeans",
            Method::KernelKmeans => "kernel-kmeans",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Method::Ours),
            "uniform" => Ok(Method::Uniform),
            "kmeans" => Ok(Method::Kmeans),
            "kernel-kmeans" => Ok(Method::KernelKmeans),
            _ => Err(Error::Argument(format!(
                "unknown method {s:?}; expected ours, uniform, kmeans or kernel-kmeans"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput {
    pub segmentation: Segmentation,
    /// Present for `Ours`.
    pub approximation: Option<Approximation>,
    /// Kernel used for assignment, if any.
    pub spec: Option<KernelSpec>,
}

/// Runs `method` on `v` with the given training settings and preprocessing.
pub fn segment_with(
    v: &VideoFeatures,
    cfg: &TrainConfig,
    prep: &Preprocess,
    method: Method,
) -> Result<MethodOutput> {
    if cfg.m == 0 || v.n_frames() < cfg.m {
        return Err(Error::Argument(format!(
            "video {} has {} frames; m must be in 1..={}",
            v.name,
            v.n_frames(),
            v.n_frames()
        )));
    }
    match method {
        Method::Ours => {
            let (approx, segmentation) = segment_video(v, cfg, prep)?;
            Ok(MethodOutput {
                segmentation,
                spec: Some(approx.spec),
                approximation: Some(approx),
            })
        }
        Method::Uniform => Ok(MethodOutput {
            segmentation: uniform_segmentation(v.n_frames(), cfg.m)?,
            approximation: None,
            spec: None,
        }),
        Method::Kmeans | Method::KernelKmeans => {
            let pv = prep.apply(v, cfg.m)?;
            let mut rng = Rng::new(cfg.seed).split(STREAM_KMEANS);
            let km = kmeans(&pv.frames, cfg.m, &mut rng, DEFAULT_KMEANS_ITERS)?;
            if method == Method::Kmeans {
                return Ok(MethodOutput {
                    segmentation: Segmentation::from_labels(km.labels),
                    approximation: None,
                    spec: None,
                });
            }
            let spec = resolve_kernel(&pv.frames, cfg)?;
            Ok(MethodOutput {
                segmentation: kernel_kmeans_assign(&pv.frames, &km.centroids, &spec)?,
                approximation: None,
                spec: Some(spec),
            })
        }
    }
}
