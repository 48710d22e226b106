//! Closed-form kernels on frame vectors.
//!
//! The network kernels are the infinite-width limits of a
//! `Dense -> ReLU -> Dense` network in NTK parameterization with weight
//! variance `sigma_w_sq` and bias variance `sigma_b_sq`:
//!
//! ```text
//! K0(a,b)  = sigma_w_sq * <a,b> / d + sigma_b_sq
//! c        = K0(a,b) / sqrt(K0(a,a) K0(b,b)),   theta = acos(c)
//! NNGP     = sigma_w_sq * sqrt(K0(a,a) K0(b,b)) * (sin theta + (pi - theta) cos theta) / (2 pi) + sigma_b_sq
//! NTK      = NNGP + K0(a,b) * sigma_w_sq * (pi - theta) / (2 pi)
//! ```
//!
//! Every gradient with respect to the second argument `b` is a linear
//! combination `ca * a + cb * b`, which [`PairEval`] stores as two scalars.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, median, sqdist, Matrix, Rng};

/// Default cap on the number of frame pairs used by the median heuristics.
pub const DEFAULT_MAX_PAIRS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelFamily {
    Gauss,
    Nngp,
    Ntk,
    NtkSphere,
    #[serde(rename = "gauss-ntk")]
    GaussTimesNtk,
    #[serde(rename = "gauss-ntk-sphere")]
    GaussTimesNtkSphere,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 6] = [
        KernelFamily::Gauss,
        KernelFamily::Nngp,
        KernelFamily::Ntk,
        KernelFamily::NtkSphere,
        KernelFamily::GaussTimesNtk,
        KernelFamily::GaussTimesNtkSphere,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Gauss => "gauss",
            KernelFamily::Nngp => "nngp",
            KernelFamily::Ntk => "ntk",
            KernelFamily::NtkSphere => "ntk-sphere",
            KernelFamily::GaussTimesNtk => "gauss-ntk",
            KernelFamily::GaussTimesNtkSphere => "gauss-ntk-sphere",
        }
    }

    pub fn uses_gauss(self) -> bool {
        matches!(
            self,
            KernelFamily::Gauss | KernelFamily::GaussTimesNtk | KernelFamily::GaussTimesNtkSphere
        )
    }

    pub fn is_product(self) -> bool {
        matches!(
            self,
            KernelFamily::GaussTimesNtk | KernelFamily::GaussTimesNtkSphere
        )
    }

    pub fn on_sphere(self) -> bool {
        matches!(
            self,
            KernelFamily::NtkSphere | KernelFamily::GaussTimesNtkSphere
        )
    }

    /// The network factor used by this family (`None` for the pure Gaussian).
    fn network(self) -> Option<NetworkKernel> {
        match self {
            KernelFamily::Gauss => None,
            KernelFamily::Nngp => Some(NetworkKernel::Nngp),
            _ => Some(NetworkKernel::Ntk),
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelFamily::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Spec(format!(
                    "unknown kernel family {s:?}; expected one of {}",
                    KernelFamily::ALL.map(KernelFamily::name).join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NetworkKernel {
    Nngp,
    Ntk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub sigma_w_sq: f64,
    pub sigma_b_sq: f64,
    /// Gaussian length-scale; the kernel is `exp(-|a-b|^2 / lambda^2)`.
    pub lambda: f64,
    /// Rescaling of the network factor in the product families.
    pub alpha: f64,
    /// Guard keeping the arc-cosine argument inside `[-1 + eps, 1 - eps]`.
    pub clamp_eps: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily) -> Self {
        Self {
            family,
            sigma_w_sq: 2.0,
            sigma_b_sq: 0.1,
            lambda: 1.0,
            alpha: 1.0,
            clamp_eps: 1e-7,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.lambda) {
            return Err(Error::Spec(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !ok(self.alpha) {
            return Err(Error::Spec(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !ok(self.sigma_w_sq) {
            return Err(Error::Spec(format!(
                "sigma_w_sq must be > 0, got {}",
                self.sigma_w_sq
            )));
        }
        if !(self.sigma_b_sq >= 0.0 && self.sigma_b_sq.is_finite()) {
            return Err(Error::Spec(format!(
                "sigma_b_sq must be >= 0, got {}",
                self.sigma_b_sq
            )));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 1e-3) {
            return Err(Error::Spec(format!(
                "clamp_eps must lie in (0, 1e-3), got {}",
                self.clamp_eps
            )));
        }
        Ok(())
    }
}

/// Kernel evaluations between two row sets, with the `KernelSpec` that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: Matrix,
    pub spec: KernelSpec,
}

/// Layer-wise closed-form values for one input pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NtkValues {
    pub k0: f64,
    pub nngp: f64,
    pub ntk: f64,
}

/// Gradient with respect to `b`, expressed as `ca * a + cb * b`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradCoeffs {
    pub ca: f64,
    pub cb: f64,
}

impl GradCoeffs {
    fn scale(self, s: f64) -> Self {
        Self {
            ca: self.ca * s,
            cb: self.cb * s,
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            ca: self.ca + o.ca,
            cb: self.cb + o.cb,
        }
    }

    pub fn materialize(self, a: &[f64], b: &[f64]) -> Vec<f64> {
        a.iter().zip(b).map(|(x, y)| self.ca * x + self.cb * y).collect()
    }
}

/// Kernel value and gradient coefficients for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEval {
    pub value: f64,
    pub grad: GradCoeffs,
}

/// Sufficient statistics of a pair: everything the kernels need.
#[derive(Debug, Clone, Copy)]
pub struct PairStats {
    pub dot: f64,
    pub sq_a: f64,
    pub sq_b: f64,
    pub sqdist: f64,
    pub dim: usize,
}

impl PairStats {
    pub fn of(a: &[f64], b: &[f64]) -> Self {
        Self::with_norms(a, b, dot(a, a), dot(b, b))
    }

    pub fn with_norms(a: &[f64], b: &[f64], sq_a: f64, sq_b: f64) -> Self {
        Self {
            dot: dot(a, b),
            sq_a,
            sq_b,
            sqdist: sqdist(a, b),
            dim: a.len(),
        }
    }
}

/// Network kernel values and gradients (w.r.t. `b`) from pair statistics.
fn network_terms(
    dot_ab: f64,
    sq_a: f64,
    sq_b: f64,
    dim: usize,
    spec: &KernelSpec,
) -> (NtkValues, GradCoeffs, GradCoeffs) {
    let sw = spec.sigma_w_sq;
    let sb = spec.sigma_b_sq;
    let s = sw / dim as f64;

    let k_ab = s * dot_ab + sb;
    let k_aa = s * sq_a + sb;
    let k_bb = s * sq_b + sb;
    let p = (k_aa * k_bb).sqrt();

    let d_kab = GradCoeffs { ca: s, cb: 0.0 };
    // dP/db = P / (2 K0(b,b)) * dK0(b,b)/db, with dK0(b,b)/db = 2 s b
    let d_p = if k_bb > 0.0 {
        GradCoeffs {
            ca: 0.0,
            cb: p * s / k_bb,
        }
    } else {
        GradCoeffs::default()
    };

    let lo = -1.0 + spec.clamp_eps;
    let hi = 1.0 - spec.clamp_eps;
    let (c, d_c) = if p > 0.0 {
        let raw = k_ab / p;
        if raw <= lo || raw >= hi {
            (raw.clamp(lo, hi), GradCoeffs::default())
        } else {
            let d_c = GradCoeffs {
                ca: s / p,
                cb: -raw * s / k_bb,
            };
            (raw, d_c)
        }
    } else {
        (0.0, GradCoeffs::default())
    };

    let theta = c.acos();
    let sin_t = (1.0 - c * c).sqrt();
    let j = sin_t + (PI - theta) * c;
    let two_pi = 2.0 * PI;

    let nngp = sw * p * j / two_pi + sb;
    // dJ/dc = pi - theta
    let d_nngp = d_p.scale(sw * j / two_pi).add(d_c.scale(sw * p * (PI - theta) / two_pi));

    let ntk_dot = sw * (PI - theta) / two_pi;
    // d(pi - theta)/dc = 1 / sin(theta)
    let d_ntk_dot = d_c.scale(sw / (two_pi * sin_t));
    let ntk = nngp + k_ab * ntk_dot;
    let d_ntk = d_nngp.add(d_kab.scale(ntk_dot)).add(d_ntk_dot.scale(k_ab));

    (
        NtkValues {
            k0: k_ab,
            nngp,
            ntk,
        },
        d_nngp,
        d_ntk,
    )
}

fn network_eval(st: &PairStats, net: NetworkKernel, sphere: bool, spec: &KernelSpec) -> Result<PairEval> {
    if sphere {
        if st.sq_a <= 0.0 || st.sq_b <= 0.0 {
            return Err(Error::DegenerateInput(
                "cannot project an all-zero row onto the sphere".into(),
            ));
        }
        let na = st.sq_a.sqrt();
        let nb = st.sq_b.sqrt();
        let cos = st.dot / (na * nb);
        let (vals, g_nngp, g_ntk) = network_terms(cos, 1.0, 1.0, st.dim, spec);
        let (value, g) = match net {
            NetworkKernel::Nngp => (vals.nngp, g_nngp),
            NetworkKernel::Ntk => (vals.ntk, g_ntk),
        };
        // Chain through b -> b/|b|: grad_b = (I - u u^T) g / |b| with g = ca*a_hat + cb*b_hat,
        // which leaves only the a_hat component, orthogonalized against b_hat.
        let grad = GradCoeffs {
            ca: g.ca / (na * nb),
            cb: -g.ca * cos / st.sq_b,
        };
        Ok(PairEval { value, grad })
    } else {
        let (vals, g_nngp, g_ntk) = network_terms(st.dot, st.sq_a, st.sq_b, st.dim, spec);
        Ok(match net {
            NetworkKernel::Nngp => PairEval {
                value: vals.nngp,
                grad: g_nngp,
            },
            NetworkKernel::Ntk => PairEval {
                value: vals.ntk,
                grad: g_ntk,
            },
        })
    }
}

fn gauss_eval(st: &PairStats, lambda: f64) -> PairEval {
    let l2 = lambda * lambda;
    let value = (-st.sqdist / l2).exp();
    let c = 2.0 * value / l2;
    PairEval {
        value,
        grad: GradCoeffs { ca: c, cb: -c },
    }
}

/// Value and gradient coefficients of the configured kernel for one pair.
///
/// `spec` is assumed valid; callers on hot paths validate once up front.
pub fn pair_eval(st: &PairStats, spec: &KernelSpec) -> Result<PairEval> {
    let fam = spec.family;
    match (fam.uses_gauss(), fam.network()) {
        (true, None) => Ok(gauss_eval(st, spec.lambda)),
        (false, Some(net)) => network_eval(st, net, fam.on_sphere(), spec),
        (true, Some(net)) => {
            let g = gauss_eval(st, spec.lambda);
            let n = network_eval(st, net, fam.on_sphere(), spec)?;
            let value = spec.alpha * n.value * g.value;
            let grad = n.grad.scale(g.value).add(g.grad.scale(n.value)).scale(spec.alpha);
            Ok(PairEval { value, grad })
        }
        (false, None) => unreachable!("every family has at least one factor"),
    }
}

fn check_dims(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "kernel arguments have dimensions {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Shape("kernel arguments must have dimension >= 1".into()));
    }
    Ok(())
}

/// Closed-form `K0`, NNGP and NTK values of the one-hidden-layer ReLU network.
pub fn ntk_base(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<NtkValues> {
    check_dims(a, b)?;
    Ok(network_terms(dot(a, b), dot(a, a), dot(b, b), a.len(), spec).0)
}

/// Kernel value for one pair under `spec`.
pub fn kernel_value(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<f64> {
    check_dims(a, b)?;
    spec.validate()?;
    Ok(pair_eval(&PairStats::of(a, b), spec)?.value)
}

/// Gradient of `k(a, b)` with respect to `b`.
pub fn kernel_grad_b(a: &[f64], b: &[f64], spec: &KernelSpec) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    spec.validate()?;
    Ok(pair_eval(&PairStats::of(a, b), spec)?.grad.materialize(a, b))
}

/// Gradient of the Gaussian factor alone.
pub fn gauss_grad_b(a: &[f64], b: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_dims(a, b)?;
    Ok(gauss_eval(&PairStats::of(a, b), lambda).grad.materialize(a, b))
}

/// Value and gradient (w.r.t. `b`) of the network factor alone, on the
/// sphere if `sphere` is set.
pub fn ntk_value_grad_b(a: &[f64], b: &[f64], spec: &KernelSpec, sphere: bool) -> Result<(f64, Vec<f64>)> {
    check_dims(a, b)?;
    let e = network_eval(&PairStats::of(a, b), NetworkKernel::Ntk, sphere, spec)?;
    Ok((e.value, e.grad.materialize(a, b)))
}

/// Gaussian kernel matrix `exp(-|a_i - b_j|^2 / lambda^2)`.
pub fn gauss_kernel(a: &Matrix, b: &Matrix, spec: &KernelSpec) -> Result<KernelMatrix> {
    let mut g = *spec;
    g.family = KernelFamily::Gauss;
    g.validate()?;
    kernel_matrix(a, b, &g).map(|km| KernelMatrix {
        values: km.values,
        spec: *spec,
    })
}

/// Divides every row by its Euclidean norm.
pub fn sphere_project(x: &Matrix) -> Result<Matrix> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = dot(row, row).sqrt();
        if n == 0.0 {
            return Err(Error::DegenerateInput(format!("row {i} is all zeros")));
        }
        row.iter_mut().for_each(|v| *v /= n);
    }
    Ok(out)
}

fn sq_norms(x: &Matrix) -> Vec<f64> {
    x.row_iter().map(|r| dot(r, r)).collect()
}

/// Kernel evaluations between every row of `a` and every row of `b`.
pub fn kernel_matrix(a: &Matrix, b: &Matrix, spec: &KernelSpec) -> Result<KernelMatrix> {
    a.check_same_cols(b, "kernel_matrix")?;
    spec.validate()?;
    if a.cols() == 0 {
        return Err(Error::Shape("kernel inputs must have at least one column".into()));
    }
    let na = sq_norms(a);
    let nb = sq_norms(b);
    let rows: Vec<Vec<f64>> = (0..a.rows())
        .into_par_iter()
        .map(|i| {
            (0..b.rows())
                .map(|j| {
                    let st = PairStats::with_norms(a.row(i), b.row(j), na[i], nb[j]);
                    pair_eval(&st, spec).map(|e| e.value)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let values = Matrix::from_vec(a.rows(), b.rows(), rows.concat())?;
    Ok(KernelMatrix {
        values,
        spec: *spec,
    })
}

/// Distinct index pairs `(i, j)`, `i < j`: all of them if there are at most
/// `max_pairs`, otherwise `max_pairs` uniform draws.
pub fn sample_pairs(n: usize, max_pairs: usize, rng: &mut Rng) -> Vec<(usize, usize)> {
    let total = n.saturating_mul(n.saturating_sub(1)) / 2;
    if total <= max_pairs {
        let mut out = Vec::with_capacity(total);
        for i in 0..n {
            for j in i + 1..n {
                out.push((i, j));
            }
        }
        return out;
    }
    (0..max_pairs)
        .map(|_| {
            let i = rng.index(n);
            let mut j = rng.index(n - 1);
            if j >= i {
                j += 1;
            }
            (i.min(j), i.max(j))
        })
        .collect()
}

fn require_two_rows(x: &Matrix) -> Result<()> {
    if x.rows() < 2 {
        return Err(Error::Argument(format!(
            "median heuristics need at least 2 rows, got {}",
            x.rows()
        )));
    }
    Ok(())
}

/// Median of squared pairwise distances, used directly as the Gaussian length-scale.
pub fn median_lengthscale(x: &Matrix, max_pairs: usize, rng: &mut Rng) -> Result<f64> {
    require_two_rows(x)?;
    let pairs = sample_pairs(x.rows(), max_pairs, rng);
    let d: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| sqdist(x.row(i), x.row(j)))
        .collect();
    let lambda = median(&d)?;
    if lambda <= 0.0 {
        return Err(Error::DegenerateScale(
            "median squared distance between frames is 0 (frames identical)".into(),
        ));
    }
    Ok(lambda)
}

/// `median(k_gauss) / median(k_net)` over distinct frame pairs.
///
/// `spec.lambda` must already be set. The network factor is the NTK (on the
/// sphere for the sphere families).
pub fn alpha_rescale(x: &Matrix, spec: &KernelSpec, max_pairs: usize, rng: &mut Rng) -> Result<f64> {
    require_two_rows(x)?;
    let mut probe = *spec;
    probe.alpha = 1.0;
    probe.validate()?;
    let pairs = sample_pairs(x.rows(), max_pairs, rng);
    let sphere = spec.family.on_sphere();
    let vals: Vec<(f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let st = PairStats::of(x.row(i), x.row(j));
            let g = gauss_eval(&st, spec.lambda).value;
            network_eval(&st, NetworkKernel::Ntk, sphere, &probe).map(|n| (g, n.value))
        })
        .collect::<Result<_>>()?;
    let (g, n): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();
    let mg = median(&g)?;
    let mn = median(&n)?;
    if mn <= 0.0 {
        return Err(Error::DegenerateScale(format!(
            "median NTK value is {mn}, cannot rescale"
        )));
    }
    let alpha = mg / mn;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::DegenerateScale(format!(
            "rescaling factor {alpha} is not positive (median Gaussian value {mg})"
        )));
    }
    Ok(alpha)
}
