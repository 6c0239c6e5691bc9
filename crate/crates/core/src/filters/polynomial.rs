use serde::{Deserialize, Serialize};

use super::check_signal;
use crate::error::{Error, Result};
use crate::graph::CsrMatrix;
use crate::linalg::DenseMatrix;

/// Graph convolutional filter `Σ_{k=0}^{K} a_k S^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFilter {
    coeffs: Vec<f64>,
}

impl PolynomialFilter {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument(
                "a polynomial filter needs at least one coefficient".into(),
            ));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.coeffs.len()
    }

    /// `a_0 X + Σ_k a_k S^k X` with exactly `K` sparse products.
    pub fn apply(&self, s: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_signal(s, x)?;
        let mut out = x.scale(self.coeffs[0]);
        let mut power = x.clone();
        for &a in &self.coeffs[1..] {
            power = s.spmm(&power)?;
            out.axpy(a, &power);
        }
        Ok(out)
    }
}
