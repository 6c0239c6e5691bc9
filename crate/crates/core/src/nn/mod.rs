//! Differentiable layers, losses, and training utilities.

mod adam;
mod gradcheck;
mod model;
mod params;
mod serialize;
mod tape;

pub use adam::{Adam, ADAM_BETA1, ADAM_BETA2, ADAM_EPS, ARMA_GUARD_OFFSET};
pub use gradcheck::{finite_difference_check, gradcheck_suite, relative_error, GradCheckReport};
pub use model::{
    FilterSpec, GraphContext, LayerSpec, Loss, Model, ModelSpec, Nonlinearity, Readout,
};
pub use params::{Param, ParamClass, ParamStore};
pub use serialize::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use tape::{Gradients, JacobiData, Tape, Var};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn leaky_relu(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// `log Σ exp(x_i)` with the maximum factored out; `-inf` for empty input.
pub fn log_sum_exp(x: &[f64]) -> f64 {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

pub(crate) fn softmax_row(x: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(x);
    x.iter().map(|v| (v - lse).exp()).collect()
}

pub fn softmax_rows(x: &DenseMatrix) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        out.row_mut(i).copy_from_slice(&softmax_row(x.row(i)));
    }
    out
}

pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    Ok(log_sum_exp(logits) - logits[label])
}

pub(crate) fn smooth_l1_scalar(r: f64, delta: f64) -> f64 {
    if r.abs() < delta {
        0.5 * r * r / delta
    } else {
        r.abs() - 0.5 * delta
    }
}

/// Elementwise smooth-ℓ1 loss, summed.
pub fn smooth_l1(pred: &[f64], target: &[f64], delta: f64) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred
        .iter()
        .zip(target)
        .map(|(p, t)| smooth_l1_scalar(p - t, delta))
        .sum())
}
