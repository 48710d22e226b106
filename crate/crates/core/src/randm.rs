//! Drawing a perturbed number of synthetic frames per video.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::{segment_with, Method, MethodOutput};
use crate::error::{Error, Result};
use crate::learner::TrainConfig;
use crate::numerics::Rng;
use crate::preprocess::{Preprocess, VideoFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomMMode {
    /// `mbar ± delta`, delta uniform in 1..=5 with a random sign.
    Synthetic,
    /// `mbar + u`, u uniform integer in `[-mbar, mbar]`.
    Real,
}

impl fmt::Display for RandomMMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RandomMMode::Synthetic => "synthetic",
            RandomMMode::Real => "real",
        })
    }
}

impl FromStr for RandomMMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(RandomMMode::Synthetic),
            "real" => Ok(RandomMMode::Real),
            _ => Err(Error::Argument(format!(
                "unknown random-m mode '{s}' (expected synthetic or real)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MDraw {
    /// Raw draw before clamping; may be zero or negative.
    pub drawn: i64,
    /// Draw clamped to `[1, n_frames]`.
    pub used: usize,
    pub clamped: bool,
}

pub fn draw_m(mbar: usize, mode: RandomMMode, n_frames: usize, rng: &mut Rng) -> Result<MDraw> {
    if mbar == 0 {
        return Err(Error::Argument("mbar must be >= 1".into()));
    }
    if n_frames == 0 {
        return Err(Error::Argument("cannot draw m for an empty video".into()));
    }
    let mbar_i = mbar as i64;
    let drawn = match mode {
        RandomMMode::Synthetic => {
            let delta = rng.int_inclusive(1, 5);
            if rng.coin() {
                mbar_i + delta
            } else {
                mbar_i - delta
            }
        }
        RandomMMode::Real => mbar_i + rng.int_inclusive(-mbar_i, mbar_i),
    };
    let used = drawn.clamp(1, n_frames as i64);
    Ok(MDraw {
        drawn,
        used: used as usize,
        clamped: used != drawn,
    })
}

impl RandomMMode {
    /// Training schedule used for a video whose m was drawn in this mode.
    pub fn train_config(self, m: usize) -> TrainConfig {
        match self {
            RandomMMode::Synthetic => TrainConfig::noisy_synthetic(m),
            RandomMMode::Real => TrainConfig::noisy_real(m),
        }
    }
}

/// Settings shared by every video of a random-m run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomMRun {
    pub mbar: usize,
    pub mode: RandomMMode,
    pub seed: u64,
    pub method: Method,
    /// Smoothing factor; 0 disables smoothing.
    pub smooth: f64,
}

/// Draws m for the `index`-th video of a run and segments it. The draw uses
/// its own substream per video, so results do not depend on processing order.
pub fn segment_random_m(v: &VideoFeatures, index: usize, run: &RandomMRun) -> Result<(MDraw, MethodOutput)> {
    let draw = draw_m(run.mbar, run.mode, v.n_frames(), &mut Rng::new(run.seed).split(index as u64))?;
    let cfg = run.mode.train_config(draw.used).with_seed(run.seed);
    let prep = Preprocess {
        smooth: run.smooth,
        normalize: false,
    };
    let out = segment_with(v, &cfg, &prep, run.method)?;
    Ok((draw, out))
}
