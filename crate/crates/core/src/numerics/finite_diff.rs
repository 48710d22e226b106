use super::Matrix;
use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-4;

/// Central-difference gradient of a scalar function of a matrix.
pub fn finite_diff_grad<F>(mut f: F, x: &Matrix, h: f64) -> Result<Matrix>
where
    F: FnMut(&Matrix) -> f64,
{
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Argument(format!("step must be positive, got {h}")));
    }
    let mut probe = x.clone();
    let mut grad = Matrix::zeros(x.rows(), x.cols());
    for k in 0..x.as_slice().len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + h;
        let fp = f(&probe);
        probe.as_mut_slice()[k] = orig - h;
        let fm = f(&probe);
        probe.as_mut_slice()[k] = orig;
        if !(fp.is_finite() && fm.is_finite()) {
            return Err(Error::Numeric(format!(
                "function is not finite around entry {k}"
            )));
        }
        grad.as_mut_slice()[k] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// Finite differences of a function of one vector.
pub fn finite_diff_vec<F>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    let m = Matrix::from_vec(1, x.len(), x.to_vec())?;
    Ok(finite_diff_grad(|p| f(p.row(0)), &m, h)?.into_vec())
}

/// `‖a − b‖ / max(‖b‖, floor)`, the error measure used by gradient checks.
pub fn relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(floor)
}
