//! JSON and CSV shapes written by the commands.

use serde::{Deserialize, Serialize};
use vidapprox_core::eval::EvalReport;
use vidapprox_core::segmentation::Segment;
use vidapprox_core::KernelSpec;

/// Settings that determine a segmentation. `epochs_run` is 0 whenever no
/// optimization happened, whichever flag caused it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub method: String,
    pub m: usize,
    pub kernel: String,
    pub epochs_run: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub smoothing: f64,
    pub normalize: bool,
    pub unit_prototypes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationArtifact {
    pub name: String,
    pub n_frames: usize,
    pub settings: Settings,
    pub frame_labels: Vec<usize>,
    pub segments: Vec<Segment>,
    pub distinct_labels: usize,
    pub kernel: Option<KernelSpec>,
    /// MMD² on the logged frames before training and after every epoch.
    pub train_log: Option<Vec<f64>>,
    pub report: Option<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandmRow {
    pub video: String,
    pub m_drawn: i64,
    pub m_used: usize,
    pub clamped: bool,
    pub mof: f64,
    pub iou: f64,
    pub f1: f64,
    pub boundary_accuracy: Option<f64>,
    pub distinct_labels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub video: String,
    pub m_used: Option<usize>,
    pub mof: f64,
    pub iou: f64,
    pub f1: f64,
    pub boundary_accuracy: Option<f64>,
}
