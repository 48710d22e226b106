//! Python module `vidapprox`.
//!
//! Frames cross the boundary as lists of rows (anything that extracts as
//! `list[list[float]]`, so `ndarray.tolist()` works). Reports and configs come
//! back as plain dicts with the same field names as the JSON artifacts.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use vidapprox_core::baselines::{segment_with, Method};
use vidapprox_core::eval::{self, EvalOptions};
use vidapprox_core::learner::Profile;
use vidapprox_core::synthgen::{generate_videos, split_videos, SynthConfig};
use vidapprox_core::{kernels, mmd, Error, KernelFamily, Matrix, VideoFeatures};

create_exception!(vidapprox, VidapproxError, PyValueError);

/// Raised with `(message, kind)` so callers can branch on `err.args[1]`.
fn to_py(e: Error) -> PyErr {
    VidapproxError::new_err((e.to_string(), e.kind()))
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).map_err(to_py)
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| to_py(e.into()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "KernelSpec", module = "vidapprox", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyKernelSpec {
    pub inner: kernels::KernelSpec,
}

#[pymethods]
impl PyKernelSpec {
    #[new]
    #[pyo3(signature = (family = "gauss-ntk", lengthscale = 1.0, alpha = 1.0, sigma_w_sq = None, sigma_b_sq = None))]
    fn new(
        family: &str,
        lengthscale: f64,
        alpha: f64,
        sigma_w_sq: Option<f64>,
        sigma_b_sq: Option<f64>,
    ) -> PyResult<Self> {
        let mut inner = kernels::KernelSpec::new(parse::<KernelFamily>(family)?)
            .with_lambda(lengthscale)
            .with_alpha(alpha);
        if let Some(w) = sigma_w_sq {
            inner.sigma_w_sq = w;
        }
        if let Some(b) = sigma_b_sq {
            inner.sigma_b_sq = b;
        }
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family.name()
    }

    #[getter]
    fn lengthscale(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn sigma_w_sq(&self) -> f64 {
        self.inner.sigma_w_sq
    }

    #[getter]
    fn sigma_b_sq(&self) -> f64 {
        self.inner.sigma_b_sq
    }

    /// Kernel value of a single pair.
    fn value(&self, a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
        kernels::kernel_value(&a, &b, &self.inner).map_err(to_py)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_dict(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "KernelSpec(family={:?}, lengthscale={}, alpha={}, sigma_w_sq={}, sigma_b_sq={})",
            self.inner.family.name(),
            self.inner.lambda,
            self.inner.alpha,
            self.inner.sigma_w_sq,
            self.inner.sigma_b_sq
        )
    }
}

/// Frame labels plus their run-length segments.
#[pyclass(name = "Segmentation", module = "vidapprox", frozen)]
pub struct PySegmentation {
    pub inner: vidapprox_core::Segmentation,
    pub prototypes: Option<Vec<Vec<f64>>>,
    pub train_log: Vec<f64>,
    pub spec: Option<kernels::KernelSpec>,
}

#[pymethods]
impl PySegmentation {
    #[getter]
    fn frame_labels(&self) -> Vec<usize> {
        self.inner.frame_labels.clone()
    }

    /// `(start, end, label)` with `end` exclusive.
    #[getter]
    fn segments(&self) -> Vec<(usize, usize, usize)> {
        self.inner.segments.iter().map(|s| (s.start, s.end, s.label)).collect()
    }

    #[getter]
    fn n_frames(&self) -> usize {
        self.inner.n_frames
    }

    #[getter]
    fn distinct_labels(&self) -> usize {
        self.inner.distinct_labels()
    }

    /// Learned synthetic frames; `None` for the baselines.
    #[getter]
    fn prototypes(&self) -> Option<Vec<Vec<f64>>> {
        self.prototypes.clone()
    }

    /// MMD² per epoch, starting with the value before training.
    #[getter]
    fn train_log(&self) -> Vec<f64> {
        self.train_log.clone()
    }

    #[getter]
    fn kernel(&self) -> Option<PyKernelSpec> {
        self.spec.map(|inner| PyKernelSpec { inner })
    }

    fn __len__(&self) -> usize {
        self.inner.n_frames
    }

    fn __repr__(&self) -> String {
        format!(
            "Segmentation(n_frames={}, segments={}, distinct_labels={})",
            self.inner.n_frames,
            self.inner.segments.len(),
            self.inner.distinct_labels()
        )
    }
}

#[pyfunction]
fn kernel_matrix(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, spec: &PyKernelSpec) -> PyResult<Vec<Vec<f64>>> {
    let k = kernels::kernel_matrix(&matrix(a)?, &matrix(b)?, &spec.inner).map_err(to_py)?;
    Ok(k.values.to_rows())
}

/// Biased (V-statistic) squared MMD between two sets of rows.
#[pyfunction]
fn mmd2(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, spec: &PyKernelSpec) -> PyResult<f64> {
    mmd::mmd2(&matrix(x)?, &matrix(y)?, &spec.inner).map_err(to_py)
}

/// Segments one video. Defaults follow the `raw` profile of the CLI.
#[pyfunction]
#[pyo3(signature = (
    frames, m, *, method = "ours", profile = "raw", seed = 0, epochs = None,
    kernel = None, lengthscale = None, smooth = None, no_train = false
))]
#[allow(clippy::too_many_arguments)]
fn segment(
    py: Python<'_>,
    frames: Vec<Vec<f64>>,
    m: usize,
    method: &str,
    profile: &str,
    seed: u64,
    epochs: Option<usize>,
    kernel: Option<&str>,
    lengthscale: Option<f64>,
    smooth: Option<f64>,
    no_train: bool,
) -> PyResult<PySegmentation> {
    let method: Method = parse(method)?;
    let profile: Profile = parse(profile)?;
    let mut cfg = profile.train_config(m).with_seed(seed);
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    if let Some(k) = kernel {
        cfg.kernel = parse(k)?;
    }
    cfg.lambda = lengthscale;
    cfg.no_train = no_train;
    let mut prep = profile.preprocess();
    if let Some(s) = smooth {
        prep.smooth = s;
    }
    let v = VideoFeatures::new("video", matrix(frames)?, None).map_err(to_py)?;
    let out = py
        .detach(|| segment_with(&v, &cfg, &prep, method))
        .map_err(to_py)?;
    let (prototypes, train_log) = match &out.approximation {
        Some(a) => (Some(a.prototypes.to_rows()), a.train_log.clone()),
        None => (None, Vec::new()),
    };
    Ok(PySegmentation {
        inner: out.segmentation,
        prototypes,
        train_log,
        spec: out.spec,
    })
}

/// Hungarian-matched scores of `pred` against `gt`, as a report dict.
#[pyfunction]
#[pyo3(signature = (pred, gt, *, exclude_bg = None, boundary_tolerance = 3, video = "video"))]
fn evaluate<'py>(
    py: Python<'py>,
    pred: Vec<usize>,
    gt: Vec<i64>,
    exclude_bg: Option<i64>,
    boundary_tolerance: Option<usize>,
    video: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let seg = vidapprox_core::Segmentation::from_labels(pred);
    let opts = EvalOptions {
        exclude_gt: exclude_bg,
        boundary_tolerance,
    };
    let report = eval::evaluate(video, &seg, &gt, &opts).map_err(to_py)?;
    to_dict(py, &report)
}

/// Synthetic moving-glyph videos as dicts with `name`, `frames`, `labels`
/// and `plan` (the `(class, length)` segments).
#[pyfunction]
#[pyo3(signature = (n_videos = 50, *, seed = 0, noise_std = 0.0, split = None))]
fn generate_moving5<'py>(
    py: Python<'py>,
    n_videos: usize,
    seed: u64,
    noise_std: f64,
    split: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = SynthConfig {
        n_videos,
        seed,
        noise_std,
        ..SynthConfig::default()
    };
    let videos = py
        .detach(|| match split {
            Some(s) => split_videos(&cfg, s),
            None => generate_videos(&cfg),
        })
        .map_err(to_py)?;
    videos
        .into_iter()
        .map(|v| {
            let d = PyDict::new(py);
            d.set_item("name", &v.features.name)?;
            d.set_item("frames", v.features.frames.to_rows())?;
            d.set_item("labels", v.features.labels.clone())?;
            d.set_item("plan", v.plan.clone())?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn vidapprox(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyKernelSpec>()?;
    m.add_class::<PySegmentation>()?;
    m.add_function(wrap_pyfunction!(kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(mmd2, m)?)?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_moving5, m)?)?;
    m.add("VidapproxError", m.py().get_type::<VidapproxError>())?;
    m.add("KERNEL_FAMILIES", KernelFamily::ALL.iter().map(|f| f.name()).collect::<Vec<_>>())?;
    Ok(())
}
