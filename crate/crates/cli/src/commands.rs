use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vidapprox_core::baselines::{segment_with, Method, MethodOutput};
use vidapprox_core::eval::{evaluate, EvalOptions, EvalReport};
use vidapprox_core::learner::{Profile, TrainConfig};
use vidapprox_core::preprocess::{load_features, parse_labels, Preprocess, VideoFeatures};
use vidapprox_core::randm::{segment_random_m, RandomMRun};
use vidapprox_core::synthgen::{write_dataset, SynthConfig};
use vidapprox_core::Segmentation;

use crate::artifacts::{AggregateRow, RandmRow, SegmentationArtifact, Settings};
use crate::args::{EvalArgs, GenArgs, RandmArgs, SegmentArgs};

#[derive(Debug)]
pub enum CliError {
    Core(vidapprox_core::Error),
    Usage(String),
    Csv(csv::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Csv(_) => "io",
        }
    }

    /// 2 for usage and file problems, 3 for numeric or consistency failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_io() => 2,
            CliError::Core(_) => 3,
            CliError::Usage(_) | CliError::Csv(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Usage(m) => f.write_str(m),
            CliError::Csv(e) => write!(f, "{e}"),
        }
    }
}

impl From<vidapprox_core::Error> for CliError {
    fn from(e: vidapprox_core::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Csv(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Integer labels are taken as-is; other tokens are looked up among the
/// interned label names. A token that names no class excludes nothing.
fn resolve_background(token: Option<&str>, names: &[(i64, String)]) -> Option<i64> {
    let t = token?;
    t.parse::<i64>()
        .ok()
        .or_else(|| names.iter().find(|(_, n)| n == t).map(|(id, _)| *id))
}

pub fn gen(a: &GenArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_videos: a.videos,
        max_repeats: a.max_repeats,
        noise_std: a.noise,
        seed: a.seed,
        ..SynthConfig::default()
    };
    fs::create_dir_all(&a.out)?;
    let manifest = write_dataset(&cfg, &a.out)?;
    let n: usize = manifest.splits.iter().map(|s| s.videos.len()).sum();
    println!("wrote {n} videos to {}", a.out.display());
    Ok(())
}

struct Plan {
    cfg: TrainConfig,
    prep: Preprocess,
    method: Method,
}

fn settings(plan: &Plan) -> Settings {
    let uses_kernel = matches!(plan.method, Method::Ours | Method::KernelKmeans);
    let trains = plan.method == Method::Ours && !plan.cfg.no_train;
    Settings {
        method: plan.method.name().to_string(),
        m: plan.cfg.m,
        kernel: if uses_kernel {
            plan.cfg.kernel.name().to_string()
        } else {
            "none".to_string()
        },
        epochs_run: if trains { plan.cfg.epochs } else { 0 },
        learning_rate: plan.cfg.learning_rate,
        weight_decay: plan.cfg.weight_decay,
        seed: plan.cfg.seed,
        smoothing: plan.prep.smooth,
        normalize: plan.prep.normalize,
        unit_prototypes: plan.cfg.unit_prototypes,
    }
}

fn artifact(v: &VideoFeatures, plan: &Plan, out: MethodOutput, report: Option<EvalReport>) -> SegmentationArtifact {
    let seg = out.segmentation;
    SegmentationArtifact {
        name: v.name.clone(),
        n_frames: seg.n_frames,
        settings: settings(plan),
        distinct_labels: seg.distinct_labels(),
        frame_labels: seg.frame_labels,
        segments: seg.segments,
        kernel: out.spec,
        train_log: out.approximation.map(|a| a.train_log),
        report,
    }
}

fn run_one(v: &VideoFeatures, plan: &Plan, opts: &EvalOptions) -> Result<SegmentationArtifact> {
    let out = segment_with(v, &plan.cfg, &plan.prep, plan.method)?;
    let report = match &v.labels {
        Some(gt) => Some(evaluate(&v.name, &out.segmentation, gt, opts)?),
        None => None,
    };
    Ok(artifact(v, plan, out, report))
}

pub fn segment(a: &SegmentArgs) -> Result<()> {
    let v = load_features(&a.features, a.labels.as_deref())?;
    let profile = a.profile.unwrap_or(Profile::Raw);
    let mut cfg = profile.train_config(a.m).with_seed(a.seed);
    if let Some(k) = a.kernel {
        cfg.kernel = k;
    }
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = a.lr {
        cfg.learning_rate = lr;
    }
    if let Some(wd) = a.wd {
        cfg.weight_decay = wd;
    }
    cfg.lambda = a.lambda;
    cfg.no_train = a.no_train;
    cfg.unit_prototypes |= a.unit_prototypes;
    let mut prep = profile.preprocess();
    if let Some(s) = a.smooth {
        prep.smooth = s;
    }
    prep.normalize = a.normalize;
    let plan = Plan {
        cfg,
        prep,
        method: a.baseline.unwrap_or(Method::Ours),
    };
    let opts = EvalOptions {
        exclude_gt: resolve_background(a.exclude_bg.as_deref(), &v.label_names),
        boundary_tolerance: Some(a.boundary_tol),
    };
    let art = run_one(&v, &plan, &opts)?;
    write_json(&a.out, &art)
}

fn read_labels(path: &Path) -> Result<(Vec<i64>, Vec<(i64, String)>)> {
    Ok(parse_labels(&fs::read_to_string(path)?))
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    if !a.aggregate.is_empty() {
        return aggregate(&a.aggregate, &a.out);
    }
    let (Some(pred), Some(labels)) = (&a.pred, &a.labels) else {
        return Err(CliError::Usage(
            "eval needs --pred and --labels, or --aggregate".into(),
        ));
    };
    let art: SegmentationArtifact = serde_json::from_str(&fs::read_to_string(pred)?)?;
    let (gt, names) = read_labels(labels)?;
    let opts = EvalOptions {
        exclude_gt: resolve_background(a.exclude_bg.as_deref(), &names),
        boundary_tolerance: Some(a.boundary_tol),
    };
    let seg = Segmentation::from_labels(art.frame_labels);
    let report = evaluate(&art.name, &seg, &gt, &opts)?;
    write_json(&a.out, &report)
}

fn aggregate(inputs: &[PathBuf], out: &Path) -> Result<()> {
    let mut rows = Vec::with_capacity(inputs.len() + 1);
    for p in inputs {
        let value: serde_json::Value = serde_json::from_str(&fs::read_to_string(p)?)?;
        let (report, m): (EvalReport, Option<usize>) = if value.get("frame_labels").is_some() {
            let art: SegmentationArtifact = serde_json::from_value(value)?;
            let m = art.settings.m;
            let report = art.report.ok_or_else(|| {
                CliError::Usage(format!("{} holds no evaluation report", p.display()))
            })?;
            (report, Some(m))
        } else {
            (serde_json::from_value(value)?, None)
        };
        rows.push(AggregateRow {
            video: report.video,
            m_used: m,
            mof: report.mof,
            iou: report.iou,
            f1: report.f1,
            boundary_accuracy: report.boundary_accuracy,
        });
    }
    let n = rows.len() as f64;
    let ba: Option<Vec<f64>> = rows.iter().map(|r| r.boundary_accuracy).collect();
    let mean = AggregateRow {
        video: "mean".into(),
        m_used: None,
        mof: rows.iter().map(|r| r.mof).sum::<f64>() / n,
        iou: rows.iter().map(|r| r.iou).sum::<f64>() / n,
        f1: rows.iter().map(|r| r.f1).sum::<f64>() / n,
        boundary_accuracy: ba.map(|v| v.iter().sum::<f64>() / n),
    };
    rows.push(mean);
    write_csv(out, &rows)
}

/// `(features, labels)` pairs of a directory, sorted by file name.
fn list_videos(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        if let Some(stem) = name.strip_suffix(".features.txt") {
            let labels = dir.join(format!("{stem}.labels.txt"));
            if !labels.is_file() {
                return Err(CliError::Usage(format!(
                    "{} has no matching {}",
                    path.display(),
                    labels.display()
                )));
            }
            out.push((path, labels));
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!(
            "no *.features.txt files in {}",
            dir.display()
        )));
    }
    out.sort();
    Ok(out)
}

pub fn randm(a: &RandmArgs) -> Result<()> {
    let videos = list_videos(&a.features_dir)?;
    if let Some(d) = &a.json_dir {
        fs::create_dir_all(d)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let run = RandomMRun {
        mbar: a.mbar,
        mode: a.mode,
        seed: a.seed,
        method: a.baseline.unwrap_or(Method::Ours),
        smooth: a.smooth.unwrap_or(0.0),
    };
    let rows: Vec<RandmRow> = pool.install(|| {
        videos
            .par_iter()
            .enumerate()
            .map(|(i, (fp, lp))| -> Result<RandmRow> {
                let v = load_features(fp, Some(lp))?;
                let (draw, out) = segment_random_m(&v, i, &run)?;
                let plan = Plan {
                    cfg: a.mode.train_config(draw.used).with_seed(a.seed),
                    prep: Preprocess {
                        smooth: run.smooth,
                        normalize: false,
                    },
                    method: run.method,
                };
                let opts = EvalOptions {
                    exclude_gt: resolve_background(a.exclude_bg.as_deref(), &v.label_names),
                    boundary_tolerance: Some(a.boundary_tol),
                };
                let gt = v.labels.as_deref().expect("labels are always loaded");
                let r = evaluate(&v.name, &out.segmentation, gt, &opts)?;
                let art = artifact(&v, &plan, out, Some(r.clone()));
                if let Some(d) = &a.json_dir {
                    write_json(&d.join(format!("{}.json", v.name)), &art)?;
                }
                Ok(RandmRow {
                    video: v.name.clone(),
                    m_drawn: draw.drawn,
                    m_used: draw.used,
                    clamped: draw.clamped,
                    mof: r.mof,
                    iou: r.iou,
                    f1: r.f1,
                    boundary_accuracy: r.boundary_accuracy,
                    distinct_labels: art.distinct_labels,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_csv(&a.out, &rows)
}
