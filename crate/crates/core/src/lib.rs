//! Per-video unsupervised action segmentation by learning a small set of
//! synthetic frames whose distribution is close, in maximum mean discrepancy,
//! to the distribution of the video's frames.
//!
//! The kernel is the product of a closed-form infinite-width NTK and a
//! Gaussian kernel. After training, each real frame is assigned to the
//! synthetic frame it is most similar to in kernel space.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod kernels;
pub mod learner;
pub mod mmd;
pub mod numerics;
pub mod preprocess;
pub mod randm;
pub mod segmentation;
pub mod synthgen;

pub use error::{Error, Result};
pub use kernels::{KernelFamily, KernelSpec};
pub use learner::{Approximation, TrainConfig};
pub use numerics::{Matrix, Rng};
pub use preprocess::VideoFeatures;
pub use segmentation::Segmentation;
