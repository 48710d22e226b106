//! Procedural moving-glyph videos: five actions, each a fixed glyph moving
//! along a fixed straight path, with one action that may repeat.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng};
use crate::preprocess::{l2_normalize_rows, write_features, write_labels, VideoFeatures};
use crate::segmentation::{run_length, Segment};

pub const N_CLASSES: usize = 5;
pub const CANVAS: usize = 28;
pub const CHANNELS: usize = 3;
pub const FRAME_DIM: usize = CANVAS * CANVAS * CHANNELS;
/// Side of the hand-drawn bitmaps.
pub const BITMAP: usize = 9;
/// Bitmap cells are drawn as `SCALE x SCALE` pixel blocks.
pub const SCALE: usize = 2;
/// Passes of the [1/4, 1/2, 1/4] blur; each widens the stamp by one pixel per side.
pub const BLUR_PASSES: usize = 2;
/// Side of the rendered stamp: the scaled bitmap plus the blur margin.
pub const GLYPH: usize = BITMAP * SCALE + 2 * BLUR_PASSES;
/// Largest top-left coordinate that keeps the glyph on the canvas.
pub const MAX_POS: usize = CANVAS - GLYPH;
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

// Digit shapes 1, 3, 5, 7, 9.
const GLYPHS: [[&str; BITMAP]; N_CLASSES] = [
    [
        "....#....",
        "...##....",
        "..#.#....",
        "....#....",
        "....#....",
        "....#....",
        "....#....",
        "....#....",
        "..#####..",
    ],
    [
        "..#####..",
        ".#.....#.",
        ".......#.",
        ".......#.",
        "...####..",
        ".......#.",
        ".......#.",
        ".#.....#.",
        "..#####..",
    ],
    [
        ".#######.",
        ".#.......",
        ".#.......",
        ".#.......",
        ".######..",
        ".......#.",
        ".......#.",
        ".......#.",
        ".######..",
    ],
    [
        ".#######.",
        ".......#.",
        "......#..",
        "......#..",
        ".....#...",
        ".....#...",
        "....#....",
        "....#....",
        "....#....",
    ],
    [
        "..#####..",
        ".#.....#.",
        ".#.....#.",
        "..######.",
        ".......#.",
        ".......#.",
        ".......#.",
        ".......#.",
        ".......#.",
    ],
];

/// Start and end (row, col) of the glyph's top-left corner for each class:
/// top-to-bottom, diagonal, inverse diagonal, right-to-left, left-to-right.
pub fn trajectory(class: usize) -> ((f64, f64), (f64, f64)) {
    let far = MAX_POS as f64;
    let mid = (MAX_POS / 2) as f64;
    match class {
        0 => ((0.0, mid), (far, mid)),
        1 => ((0.0, 0.0), (far, far)),
        2 => ((0.0, far), (far, 0.0)),
        3 => ((mid, far), (mid, 0.0)),
        4 => ((mid, 0.0), (mid, far)),
        _ => panic!("class {class} out of range"),
    }
}

/// Top-left corner at frame `t` of a segment of `len` frames. The first
/// frame sits at the start of the path and the last at its end.
pub fn position(class: usize, t: usize, len: usize) -> (usize, usize) {
    let ((r0, c0), (r1, c1)) = trajectory(class);
    let f = if len <= 1 { 1.0 } else { t as f64 / (len - 1) as f64 };
    let r = (r0 + (r1 - r0) * f).round() as usize;
    let c = (c0 + (c1 - c0) * f).round() as usize;
    (r.min(MAX_POS), c.min(MAX_POS))
}

/// The `GLYPH x GLYPH` intensity stamp of a class: the bitmap scaled up and
/// blurred `BLUR_PASSES` times with a separable [1/4, 1/2, 1/4] filter.
pub fn glyph_stamp(class: usize) -> Vec<f64> {
    assert!(class < N_CLASSES, "class {class} out of range");
    let mut img = vec![0.0; GLYPH * GLYPH];
    let m = BLUR_PASSES;
    for (br, line) in GLYPHS[class].iter().enumerate() {
        for (bc, ch) in line.bytes().enumerate() {
            if ch == b'#' {
                for dr in 0..SCALE {
                    for dc in 0..SCALE {
                        img[(m + br * SCALE + dr) * GLYPH + m + bc * SCALE + dc] = 1.0;
                    }
                }
            }
        }
    }
    let taps = [0.25, 0.5, 0.25];
    let blur = |src: &[f64], horizontal: bool| {
        let mut out = vec![0.0; GLYPH * GLYPH];
        for r in 0..GLYPH {
            for c in 0..GLYPH {
                let mut acc = 0.0;
                for (k, w) in taps.iter().enumerate() {
                    // neighbour at offset k - 1 along the blurred axis
                    let (rr, cc) = if horizontal { (r + 1, c + k) } else { (r + k, c + 1) };
                    if (1..=GLYPH).contains(&rr) && (1..=GLYPH).contains(&cc) {
                        acc += w * src[(rr - 1) * GLYPH + cc - 1];
                    }
                }
                out[r * GLYPH + c] = acc;
            }
        }
        out
    };
    for _ in 0..BLUR_PASSES {
        img = blur(&blur(&img, true), false);
    }
    img
}

/// Stamps glyph `class` with its top-left corner at `pos` onto an HWC canvas,
/// keeping the brighter value per pixel. All channels get the same value.
pub fn render_glyph(class: usize, pos: (usize, usize), canvas: &mut [f64]) {
    assert_eq!(canvas.len(), FRAME_DIM);
    let stamp = glyph_stamp(class);
    let (r0, c0) = (pos.0.min(MAX_POS), pos.1.min(MAX_POS));
    for r in 0..GLYPH {
        for c in 0..GLYPH {
            let v = stamp[r * GLYPH + c];
            if v > 0.0 {
                let base = ((r0 + r) * CANVAS + c0 + c) * CHANNELS;
                canvas[base..base + CHANNELS].iter_mut().for_each(|p| *p = p.max(v));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_videos: usize,
    /// Inclusive segment length range.
    pub seg_len: (usize, usize),
    pub repeat_class: usize,
    /// The repeat class occurs between 1 and this many times.
    pub max_repeats: usize,
    /// Standard deviation of additive pixel noise; 0 disables it.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_videos: 50,
            seg_len: (5, 30),
            repeat_class: 1,
            max_repeats: 3,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.seg_len;
        if lo == 0 || lo > hi {
            return Err(Error::Argument(format!("bad segment length range {lo}..={hi}")));
        }
        if self.repeat_class >= N_CLASSES {
            return Err(Error::Argument(format!("repeat class {} out of range", self.repeat_class)));
        }
        if self.max_repeats == 0 || self.max_repeats > N_CLASSES {
            // more repeats than other classes would force adjacent duplicates
            return Err(Error::Argument(format!("max_repeats must be in 1..={N_CLASSES}")));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Argument("noise_std must be finite and >= 0".into()));
        }
        Ok(())
    }

    /// Same settings with the seed of split `index`.
    pub fn for_split(&self, index: usize) -> SynthConfig {
        SynthConfig {
            seed: Rng::new(self.seed).split(1000 + index as u64).seed(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub features: VideoFeatures,
    /// Planned (class, length) segments in temporal order.
    pub plan: Vec<(usize, usize)>,
}

impl SynthVideo {
    pub fn repeat_count(&self, class: usize) -> usize {
        self.plan.iter().filter(|&&(c, _)| c == class).count()
    }

    /// Ground-truth segments as a run-length encoding.
    pub fn segments(&self) -> Vec<Segment> {
        let labels: Vec<usize> = self
            .features
            .labels
            .as_ref()
            .map(|l| l.iter().map(|&v| v as usize).collect())
            .unwrap_or_default();
        run_length(&labels)
    }
}

/// Shuffled class order with `repeats` copies of the repeat class and no two
/// equal neighbors.
fn action_order(cfg: &SynthConfig, repeats: usize, rng: &mut Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..N_CLASSES).filter(|&c| c != cfg.repeat_class).collect();
    order.extend(std::iter::repeat_n(cfg.repeat_class, repeats));
    loop {
        rng.shuffle(&mut order);
        if order.windows(2).all(|w| w[0] != w[1]) {
            return order;
        }
    }
}

fn generate_video(cfg: &SynthConfig, name: String, rng: &mut Rng) -> Result<SynthVideo> {
    let repeats = rng.int_inclusive(1, cfg.max_repeats as i64) as usize;
    let order = action_order(cfg, repeats, rng);
    let (lo, hi) = cfg.seg_len;
    let plan: Vec<(usize, usize)> = order
        .into_iter()
        .map(|c| (c, rng.int_inclusive(lo as i64, hi as i64) as usize))
        .collect();
    let n: usize = plan.iter().map(|&(_, l)| l).sum();
    let mut data = vec![0.0; n * FRAME_DIM];
    let mut labels = Vec::with_capacity(n);
    let mut frame = 0;
    for &(class, len) in &plan {
        for t in 0..len {
            let canvas = &mut data[frame * FRAME_DIM..(frame + 1) * FRAME_DIM];
            render_glyph(class, position(class, t, len), canvas);
            if cfg.noise_std > 0.0 {
                for v in canvas.iter_mut() {
                    *v = (*v + cfg.noise_std * rng.normal()).clamp(0.0, 1.0);
                }
            }
            labels.push(class as i64);
            frame += 1;
        }
    }
    let raw = VideoFeatures::new(name, Matrix::from_vec(n, FRAME_DIM, data)?, Some(labels))?;
    Ok(SynthVideo {
        features: l2_normalize_rows(&raw)?,
        plan,
    })
}

/// `cfg.n_videos` videos named `video_000`, `video_001`, ... Each video
/// draws from its own substream, so the output does not depend on the
/// thread count.
pub fn generate_videos(cfg: &SynthConfig) -> Result<Vec<SynthVideo>> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    (0..cfg.n_videos)
        .into_par_iter()
        .map(|i| generate_video(cfg, format!("video_{i:03}"), &mut root.split(i as u64)))
        .collect()
}

pub fn generate_moving5(cfg: &SynthConfig) -> Result<Vec<VideoFeatures>> {
    Ok(generate_videos(cfg)?.into_iter().map(|v| v.features).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestVideo {
    pub name: String,
    pub features: String,
    pub labels: String,
    pub n_frames: usize,
    pub segments: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSplit {
    pub name: String,
    pub seed: u64,
    pub videos: Vec<ManifestVideo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SynthConfig,
    pub frame_shape: [usize; 3],
    pub n_classes: usize,
    pub splits: Vec<ManifestSplit>,
}

/// Writes `dir/<split>/<video>.features.txt` and `.labels.txt` for the train,
/// val and test splits, plus `dir/manifest.json`.
pub fn write_dataset(cfg: &SynthConfig, dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let mut splits = Vec::new();
    for (s, split) in SPLITS.iter().enumerate() {
        let scfg = cfg.for_split(s);
        let sdir = dir.join(split);
        fs::create_dir_all(&sdir)?;
        let videos = generate_videos(&scfg)?;
        let entries = videos
            .par_iter()
            .map(|v| -> Result<ManifestVideo> {
                let name = &v.features.name;
                let features = format!("{split}/{name}.features.txt");
                let labels = format!("{split}/{name}.labels.txt");
                write_features(&dir.join(&features), &v.features.frames)?;
                write_labels(&dir.join(&labels), v.features.labels.as_deref().unwrap_or(&[]))?;
                Ok(ManifestVideo {
                    name: name.clone(),
                    features,
                    labels,
                    n_frames: v.features.n_frames(),
                    segments: v.plan.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        splits.push(ManifestSplit {
            name: split.to_string(),
            seed: scfg.seed,
            videos: entries,
        });
    }
    let manifest = Manifest {
        config: cfg.clone(),
        frame_shape: [CANVAS, CANVAS, CHANNELS],
        n_classes: N_CLASSES,
        splits,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// The videos of one split, regenerated in memory exactly as `write_dataset`
/// would write them.
pub fn split_videos(cfg: &SynthConfig, split: &str) -> Result<Vec<SynthVideo>> {
    let s = SPLITS
        .iter()
        .position(|&n| n == split)
        .ok_or_else(|| Error::Argument(format!("unknown split '{split}'")))?;
    generate_videos(&cfg.for_split(s))
}
