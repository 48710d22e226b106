//! Learning the video approximation: uniform-segment-mean initialization,
//! batched MMD² minimization, and assignment of frames to the synthetic frame
//! with the highest kernel similarity.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{
    alpha_rescale, kernel_matrix, median_lengthscale, KernelFamily, KernelSpec, DEFAULT_MAX_PAIRS,
};
use crate::mmd::{make_batch_plan, mmd2, mmd2_grad_y};
use crate::numerics::{adam_step, dot, Matrix, OptimizerState, Rng};
use crate::preprocess::{Preprocess, VideoFeatures};
use crate::segmentation::{uniform_spans, Segmentation};

/// Frames sampled when estimating the kernel scales on long videos.
pub const SCALE_FRAMES: usize = 2000;
/// Frames used for the per-epoch loss log on long videos.
pub const LOG_FRAMES: usize = 2000;

// Rng substreams derived from the training seed.
const STREAM_SCALE_FRAMES: u64 = 1;
const STREAM_SCALE_PAIRS: u64 = 2;
const STREAM_LOG_FRAMES: u64 = 3;
const STREAM_BATCHES: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Number of synthetic frames.
    pub m: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Skip optimization and keep the uniform-segment means.
    pub no_train: bool,
    pub kernel: KernelFamily,
    /// Fixed Gaussian length-scale instead of the median heuristic.
    pub lambda: Option<f64>,
    pub max_pairs: usize,
    /// Keep the synthetic frames at unit norm: the optimizer moves free
    /// parameters and the kernel sees their row-normalized copies. The free
    /// parameters start at norm `sqrt(D)`, so their coordinates are of order
    /// one and a learning-rate step is small relative to them.
    #[serde(default)]
    pub unit_prototypes: bool,
}

impl TrainConfig {
    /// 100 epochs, learning rate 5e-2, weight decay 1e-3, Gauss x NTK kernel.
    pub fn new(m: usize) -> Self {
        Self {
            m,
            epochs: 100,
            learning_rate: 5e-2,
            weight_decay: 1e-3,
            seed: 0,
            no_train: false,
            kernel: KernelFamily::GaussTimesNtk,
            lambda: None,
            max_pairs: DEFAULT_MAX_PAIRS,
            unit_prototypes: false,
        }
    }

    /// Short schedule for the synthetic moving-glyph videos.
    pub fn moving5(m: usize) -> Self {
        Self {
            epochs: 10,
            unit_prototypes: true,
            ..Self::new(m)
        }
    }

    /// Schedule used when `m` is drawn at random on synthetic videos.
    pub fn noisy_synthetic(m: usize) -> Self {
        Self {
            epochs: 20,
            weight_decay: 1e-4,
            unit_prototypes: true,
            ..Self::new(m)
        }
    }

    /// Schedule used when `m` is drawn at random on real feature files.
    pub fn noisy_real(m: usize) -> Self {
        Self {
            epochs: 200,
            weight_decay: 1e-4,
            ..Self::new(m)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_kernel(mut self, kernel: KernelFamily) -> Self {
        self.kernel = kernel;
        self
    }
}

/// Smoothing presets by video length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// s = 2.5
    Long,
    /// s = 1.5
    Short,
    /// No smoothing, 10 epochs.
    Synthetic,
    /// No smoothing.
    Raw,
}

impl Profile {
    pub fn smoothing(self) -> f64 {
        match self {
            Profile::Long => 2.5,
            Profile::Short => 1.5,
            Profile::Synthetic | Profile::Raw => 0.0,
        }
    }

    pub fn preprocess(self) -> Preprocess {
        Preprocess {
            smooth: self.smoothing(),
            normalize: false,
        }
    }

    /// Training schedule associated with the profile.
    pub fn train_config(self, m: usize) -> TrainConfig {
        match self {
            Profile::Synthetic => TrainConfig::moving5(m),
            _ => TrainConfig::new(m),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Long => "long",
            Profile::Short => "short",
            Profile::Synthetic => "synthetic",
            Profile::Raw => "raw",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "long" => Ok(Profile::Long),
            "short" => Ok(Profile::Short),
            "synthetic" => Ok(Profile::Synthetic),
            "raw" => Ok(Profile::Raw),
            _ => Err(Error::Argument(format!(
                "unknown profile {s:?}; expected long, short, synthetic or raw"
            ))),
        }
    }
}

/// The learned synthetic frames and the frozen kernel they were trained under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Approximation {
    pub prototypes: Matrix,
    pub spec: KernelSpec,
    /// Full-data MMD² before training, then after every epoch.
    pub train_log: Vec<f64>,
}

/// Mean frame of each of `m` uniform contiguous spans.
pub fn init_uniform_means(frames: &Matrix, m: usize) -> Result<Matrix> {
    let spans = uniform_spans(frames.rows(), m)?;
    let d = frames.cols();
    let mut out = Matrix::zeros(m, d);
    for (j, span) in spans.iter().enumerate() {
        let len = span.len() as f64;
        let row = out.row_mut(j);
        for i in span.clone() {
            row.iter_mut()
                .zip(frames.row(i))
                .for_each(|(a, x)| *a += x);
        }
        row.iter_mut().for_each(|a| *a /= len);
    }
    Ok(out)
}

/// Rows scaled to unit Euclidean norm.
pub fn unit_rows(p: &Matrix) -> Result<Matrix> {
    let mut out = p.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = dot(row, row).sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateInput(format!(
                "synthetic frame {i} has norm {n} and cannot be normalized"
            )));
        }
        row.iter_mut().for_each(|x| *x /= n);
    }
    Ok(out)
}

/// Pulls a gradient with respect to `unit_rows(p)` back to `p`:
/// `(g - y (y . g)) / |p|` per row.
pub fn unit_rows_backward(p: &Matrix, y: &Matrix, gy: &Matrix) -> Matrix {
    let mut gp = gy.clone();
    for i in 0..p.rows() {
        let norm = dot(p.row(i), p.row(i)).sqrt();
        let s = dot(y.row(i), gy.row(i));
        let yi = y.row(i).to_vec();
        gp.row_mut(i)
            .iter_mut()
            .zip(&yi)
            .for_each(|(g, yv)| *g = (*g - yv * s) / norm);
    }
    gp
}

fn subsample(frames: &Matrix, cap: usize, rng: &mut Rng) -> Matrix {
    if frames.rows() <= cap {
        frames.clone()
    } else {
        frames.select_rows(&rng.sample_indices(frames.rows(), cap))
    }
}

/// Sets the Gaussian length-scale and the product rescaling from the frames.
///
/// Both are computed once, on the same sampled pairs, and then stay fixed.
pub fn resolve_kernel(frames: &Matrix, cfg: &TrainConfig) -> Result<KernelSpec> {
    let root = Rng::new(cfg.seed);
    let sample = subsample(frames, SCALE_FRAMES, &mut root.split(STREAM_SCALE_FRAMES));
    let pair_rng = root.split(STREAM_SCALE_PAIRS);
    let mut spec = KernelSpec::new(cfg.kernel);
    spec.lambda = match cfg.lambda {
        Some(l) => l,
        None => median_lengthscale(&sample, cfg.max_pairs, &mut pair_rng.clone())?,
    };
    if cfg.kernel.is_product() {
        spec.alpha = alpha_rescale(&sample, &spec, cfg.max_pairs, &mut pair_rng.clone())?;
    }
    spec.validate()?;
    Ok(spec)
}

/// Learns `cfg.m` synthetic frames approximating the frame distribution of `v`.
pub fn train_approximation(v: &VideoFeatures, cfg: &TrainConfig) -> Result<Approximation> {
    let frames = &v.frames;
    if cfg.m == 0 {
        return Err(Error::Argument("m must be >= 1".into()));
    }
    if frames.rows() < cfg.m {
        return Err(Error::Argument(format!(
            "video {} has {} frames, fewer than m = {}",
            v.name,
            frames.rows(),
            cfg.m
        )));
    }
    if frames.rows() < 2 {
        return Err(Error::Argument(format!(
            "video {} needs at least 2 frames",
            v.name
        )));
    }
    let spec = resolve_kernel(frames, cfg)?;
    let root = Rng::new(cfg.seed);
    let log_frames = subsample(frames, LOG_FRAMES, &mut root.split(STREAM_LOG_FRAMES));

    let mut params = init_uniform_means(frames, cfg.m)?;
    if cfg.unit_prototypes {
        let scale = (frames.cols() as f64).sqrt();
        params = unit_rows(&params)?.map(|v| v * scale);
    }
    let view = |p: &Matrix| -> Result<Matrix> {
        if cfg.unit_prototypes {
            unit_rows(p)
        } else {
            Ok(p.clone())
        }
    };
    let mut prototypes = view(&params)?;
    let mut train_log = vec![mmd2(&log_frames, &prototypes, &spec)?];
    if cfg.no_train || cfg.epochs == 0 {
        return Ok(Approximation {
            prototypes,
            spec,
            train_log,
        });
    }

    let mut state = OptimizerState::new(cfg.m, frames.cols(), cfg.learning_rate, cfg.weight_decay)?;
    let mut batch_rng = root.split(STREAM_BATCHES);
    for epoch in 0..cfg.epochs {
        let plan = make_batch_plan(frames.rows(), cfg.m, &mut batch_rng);
        for batch in plan.batches() {
            let x = frames.select_rows(batch);
            let grad = mmd2_grad_y(&x, &prototypes, &spec)?;
            let grad = if cfg.unit_prototypes {
                unit_rows_backward(&params, &prototypes, &grad)
            } else {
                grad
            };
            adam_step(&mut params, &grad, &mut state)?;
            prototypes = view(&params)?;
        }
        let loss = mmd2(&log_frames, &prototypes, &spec)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!("loss diverged at epoch {epoch}")));
        }
        train_log.push(loss);
    }
    Ok(Approximation {
        prototypes,
        spec,
        train_log,
    })
}

/// Labels every frame with the prototype of maximal kernel similarity
/// (lowest index on ties).
pub fn assign_by_kernel(frames: &Matrix, prototypes: &Matrix, spec: &KernelSpec) -> Result<Segmentation> {
    let k = kernel_matrix(frames, prototypes, spec)?.values;
    let labels = k
        .row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| {
                    if v > best.1 {
                        (j, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect();
    Ok(Segmentation::from_labels(labels))
}

pub fn assign(v: &VideoFeatures, approx: &Approximation) -> Result<Segmentation> {
    assign_by_kernel(&v.frames, &approx.prototypes, &approx.spec)
}

/// Preprocess, train and assign.
pub fn segment_video(
    v: &VideoFeatures,
    cfg: &TrainConfig,
    prep: &Preprocess,
) -> Result<(Approximation, Segmentation)> {
    let pv = prep.apply(v, cfg.m)?;
    let approx = train_approximation(&pv, cfg)?;
    let seg = assign(&pv, &approx)?;
    Ok((approx, seg))
}
