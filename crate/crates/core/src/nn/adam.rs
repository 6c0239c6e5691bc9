use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

use super::params::ParamStore;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;
/// Distance an ARMA `γ` is pushed to when it lands on a diagonal entry.
pub const ARMA_GUARD_OFFSET: f64 = 1e-6;

/// Bias-corrected ADAM with one moment pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<DenseMatrix>,
    second: Vec<DenseMatrix>,
}

impl Adam {
    pub fn new(learning_rate: f64, params: &ParamStore) -> Self {
        let zeros: Vec<DenseMatrix> = params
            .iter()
            .map(|p| DenseMatrix::zeros(p.value.rows(), p.value.cols()))
            .collect();
        Self {
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut ParamStore, grads: &[DenseMatrix]) -> Result<()> {
        if grads.len() != params.len() || self.first.len() != params.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradients and {} moment slots for {} parameters",
                grads.len(),
                self.first.len(),
                params.len()
            )));
        }
        for (i, g) in grads.iter().enumerate() {
            if g.shape() != params.get(i).value.shape() || g.shape() != self.first[i].shape() {
                return Err(Error::ShapeMismatch(format!(
                    "gradient of parameter {} has shape {:?}",
                    params.get(i).name,
                    g.shape()
                )));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, g) in grads.iter().enumerate() {
            let m = self.first[i].as_mut_slice();
            let v = self.second[i].as_mut_slice();
            let w = params.value_mut(i).as_mut_slice();
            for (((w, m), v), &g) in w.iter_mut().zip(m).zip(v).zip(g.as_slice()) {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let mhat = *m / c1;
                let vhat = *v / c2;
                *w -= self.learning_rate * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
