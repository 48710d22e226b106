use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// Adam moments and hyperparameters with decoupled weight decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub first_moment: Matrix,
    pub second_moment: Matrix,
    pub step_count: u64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl OptimizerState {
    pub fn new(rows: usize, cols: usize, learning_rate: f64, weight_decay: f64) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be finite and non-negative, got {learning_rate}"
            )));
        }
        if !(weight_decay >= 0.0 && weight_decay.is_finite()) {
            return Err(Error::Argument(format!(
                "weight decay must be finite and non-negative, got {weight_decay}"
            )));
        }
        Ok(Self {
            first_moment: Matrix::zeros(rows, cols),
            second_moment: Matrix::zeros(rows, cols),
            step_count: 0,
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        })
    }
}

/// One AdamW step. `params` are updated in place.
///
/// Moments are bias corrected; the decay term `lr * weight_decay * params`
/// uses the parameters from before the step.
pub fn adam_step(params: &mut Matrix, grad: &Matrix, state: &mut OptimizerState) -> Result<()> {
    params.check_same_shape(grad, "adam_step gradient")?;
    params.check_same_shape(&state.first_moment, "adam_step first moment")?;
    params.check_same_shape(&state.second_moment, "adam_step second moment")?;
    if !grad.is_finite() {
        return Err(Error::Numeric("adam_step received a non-finite gradient".into()));
    }

    state.step_count += 1;
    let t = state.step_count as f64;
    let (b1, b2) = (state.beta1, state.beta2);
    let bc1 = 1.0 - b1.powf(t);
    let bc2 = 1.0 - b2.powf(t);
    let lr = state.learning_rate;
    let wd = state.weight_decay;

    let m = state.first_moment.as_mut_slice();
    let v = state.second_moment.as_mut_slice();
    for (((p, &g), m), v) in params
        .as_mut_slice()
        .iter_mut()
        .zip(grad.as_slice())
        .zip(m.iter_mut())
        .zip(v.iter_mut())
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p = *p - lr * (m_hat / (v_hat.sqrt() + state.epsilon)) - lr * wd * *p;
    }
    Ok(())
}
