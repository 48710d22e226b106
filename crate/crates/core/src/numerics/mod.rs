//! Dense numeric substrate: matrices, seeded RNG, medians, AdamW and a
//! central-difference gradient checker.

mod finite_diff;
mod matrix;
mod optim;
mod rng;
mod stats;

pub use finite_diff::{finite_diff_grad, finite_diff_vec, relative_error, DEFAULT_STEP};
pub use matrix::{dot, pairwise_sqdist, sqdist, Matrix};
pub use optim::{adam_step, OptimizerState};
pub use rng::Rng;
pub use stats::median;
