//! Squared MMD (V-statistic) between a set of real frames and a set of
//! synthetic frames, its gradient in the synthetic frames, and the shuffled
//! batching used during training.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, pair_eval, KernelSpec, PairStats};
use crate::numerics::{dot, Matrix, Rng};

fn check_inputs(x: &Matrix, y: &Matrix) -> Result<()> {
    x.check_same_cols(y, "mmd2")?;
    if x.rows() == 0 || y.rows() == 0 {
        return Err(Error::Argument("mmd2 needs at least one row on each side".into()));
    }
    Ok(())
}

fn mean(k: &Matrix) -> f64 {
    k.sum() / (k.rows() * k.cols()) as f64
}

/// `mean k(x, x) + mean k(y, y) - 2 mean k(x, y)`, self-pairs included.
pub fn mmd2(x: &Matrix, y: &Matrix, spec: &KernelSpec) -> Result<f64> {
    check_inputs(x, y)?;
    let kxx = kernel_matrix(x, x, spec)?.values;
    let kyy = kernel_matrix(y, y, spec)?.values;
    let kxy = kernel_matrix(x, y, spec)?.values;
    Ok(mean(&kxx) + mean(&kyy) - 2.0 * mean(&kxy))
}

/// Gradient of [`mmd2`] with respect to every row of `y`.
pub fn mmd2_grad_y(x: &Matrix, y: &Matrix, spec: &KernelSpec) -> Result<Matrix> {
    check_inputs(x, y)?;
    spec.validate()?;
    let n = x.rows() as f64;
    let m = y.rows() as f64;
    let d = y.cols();
    let nx: Vec<f64> = x.row_iter().map(|r| dot(r, r)).collect();
    let ny: Vec<f64> = y.row_iter().map(|r| dot(r, r)).collect();

    let rows: Vec<Vec<f64>> = (0..y.rows())
        .into_par_iter()
        .map(|a| -> Result<Vec<f64>> {
            let ya = y.row(a);
            let mut g = vec![0.0; d];
            let mut own = 0.0;
            // d/dy_a of (1/m^2) sum_{b,c} k(y_b, y_c): symmetric kernel, so 2/m^2 sum_b grad_2 k(y_b, y_a)
            let wy = 2.0 / (m * m);
            for b in 0..y.rows() {
                let yb = y.row(b);
                let e = pair_eval(&PairStats::with_norms(yb, ya, ny[b], ny[a]), spec)?;
                let ca = wy * e.grad.ca;
                g.iter_mut().zip(yb).for_each(|(gi, v)| *gi += ca * v);
                own += wy * e.grad.cb;
            }
            let wx = -2.0 / (n * m);
            for i in 0..x.rows() {
                let xi = x.row(i);
                let e = pair_eval(&PairStats::with_norms(xi, ya, nx[i], ny[a]), spec)?;
                let ca = wx * e.grad.ca;
                g.iter_mut().zip(xi).for_each(|(gi, v)| *gi += ca * v);
                own += wx * e.grad.cb;
            }
            g.iter_mut().zip(ya).for_each(|(gi, v)| *gi += own * v);
            Ok(g)
        })
        .collect::<Result<_>>()?;
    Matrix::from_vec(y.rows(), d, rows.concat())
}

/// One epoch's worth of shuffled batches of real frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MmdBatchPlan {
    pub batch_size: usize,
    pub epoch_permutation: Vec<usize>,
    /// Always false: the final short batch is kept.
    pub drop_last: bool,
}

impl MmdBatchPlan {
    pub fn batches(&self) -> impl Iterator<Item = &[usize]> + '_ {
        self.epoch_permutation.chunks(self.batch_size)
    }
}

/// Batches of size `max(1, n / m)` over a fresh permutation of `0..n`.
pub fn make_batch_plan(n: usize, m: usize, rng: &mut Rng) -> MmdBatchPlan {
    MmdBatchPlan {
        batch_size: (n / m.max(1)).max(1),
        epoch_permutation: rng.permutation(n),
        drop_last: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_value, KernelFamily};
    use crate::numerics::{finite_diff_grad, relative_error, DEFAULT_STEP};

    fn spec(f: KernelFamily) -> KernelSpec {
        KernelSpec::new(f).with_lambda(1.1).with_alpha(0.8)
    }

    #[test]
    fn identical_samples_have_zero_mmd() {
        let mut rng = Rng::new(1);
        let x = rng.uniform_matrix(6, 3, -1.0, 1.0);
        for f in KernelFamily::ALL {
            assert!(mmd2(&x, &x, &spec(f)).unwrap().abs() <= 1e-10);
        }
    }

    #[test]
    fn two_point_closed_form() {
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0]]).unwrap();
        let s = KernelSpec::new(KernelFamily::Gauss);
        let got = mmd2(&x, &y, &s).unwrap();
        assert!((got - 2.0 * (1.0 - (-1.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn matches_scalar_triple_loop() {
        let mut rng = Rng::new(2);
        let x = rng.uniform_matrix(7, 3, -1.0, 1.0);
        let y = rng.uniform_matrix(4, 3, -1.0, 1.0);
        for f in KernelFamily::ALL {
            let s = spec(f);
            let k = |a: &[f64], b: &[f64]| kernel_value(a, b, &s).unwrap();
            let mut sxx = 0.0;
            for i in 0..7 {
                for j in 0..7 {
                    sxx += k(x.row(i), x.row(j));
                }
            }
            let mut syy = 0.0;
            for a in 0..4 {
                for b in 0..4 {
                    syy += k(y.row(a), y.row(b));
                }
            }
            let mut sxy = 0.0;
            for i in 0..7 {
                for a in 0..4 {
                    sxy += k(x.row(i), y.row(a));
                }
            }
            let want = sxx / 49.0 + syy / 16.0 - 2.0 * sxy / 28.0;
            assert!((mmd2(&x, &y, &s).unwrap() - want).abs() < 1e-10, "{f}");
        }
    }

    #[test]
    fn gradient_vanishes_at_identical_samples() {
        let mut rng = Rng::new(3);
        let x = rng.uniform_matrix(4, 2, -1.0, 1.0);
        let g = mmd2_grad_y(&x, &x, &spec(KernelFamily::Gauss)).unwrap();
        assert!(g.frobenius_norm() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(4);
        for f in KernelFamily::ALL {
            let s = spec(f);
            let x = rng.uniform_matrix(5, 2, -1.0, 1.0);
            let y = rng.uniform_matrix(3, 2, -1.0, 1.0);
            let g = mmd2_grad_y(&x, &y, &s).unwrap();
            let fd = finite_diff_grad(|yy| mmd2(&x, yy, &s).unwrap(), &y, DEFAULT_STEP).unwrap();
            let err = relative_error(g.as_slice(), fd.as_slice(), 1e-8);
            assert!(err < 1e-4, "{f}: {err}");
        }
    }

    #[test]
    fn toy_gradient_fd_is_step_consistent() {
        // 4x2 toy problem: the finite-difference oracle agrees with the analytic
        // gradient at h and at h/2.
        let mut rng = Rng::new(44);
        let x = rng.uniform_matrix(6, 2, -1.0, 1.0);
        let y = rng.uniform_matrix(4, 2, -1.0, 1.0);
        let s = spec(KernelFamily::GaussTimesNtk);
        let g = mmd2_grad_y(&x, &y, &s).unwrap();
        for h in [DEFAULT_STEP, DEFAULT_STEP / 2.0] {
            let fd = finite_diff_grad(|yy| mmd2(&x, yy, &s).unwrap(), &y, h).unwrap();
            assert!(relative_error(g.as_slice(), fd.as_slice(), 1e-8) < 1e-4);
        }
    }

    #[test]
    fn duplicating_real_rows_leaves_gradient_unchanged() {
        let mut rng = Rng::new(5);
        let x = rng.uniform_matrix(5, 3, -1.0, 1.0);
        let y = rng.uniform_matrix(2, 3, -1.0, 1.0);
        let idx: Vec<usize> = (0..5).flat_map(|i| [i, i]).collect();
        let xx = x.select_rows(&idx);
        let s = spec(KernelFamily::GaussTimesNtk);
        let g1 = mmd2_grad_y(&x, &y, &s).unwrap();
        let g2 = mmd2_grad_y(&xx, &y, &s).unwrap();
        assert!(g1.max_abs_diff(&g2) < 1e-10);
    }

    #[test]
    fn batch_plan_sizes() {
        let mut rng = Rng::new(0);
        let p = make_batch_plan(10, 3, &mut rng);
        assert_eq!(p.batch_size, 3);
        let sizes: Vec<usize> = p.batches().map(<[usize]>::len).collect();
        assert_eq!(sizes, vec![3, 3, 3, 1]);
        assert!(!p.drop_last);
        assert_eq!(make_batch_plan(4, 9, &mut rng).batch_size, 1);
        let mut perm = make_batch_plan(100, 7, &mut rng).epoch_permutation;
        perm.sort_unstable();
        assert_eq!(perm, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn shape_mismatch_is_error() {
        let x = Matrix::zeros(2, 2);
        let y = Matrix::zeros(2, 3);
        assert!(matches!(
            mmd2(&x, &y, &spec(KernelFamily::Gauss)),
            Err(Error::Shape(_))
        ));
    }
}
