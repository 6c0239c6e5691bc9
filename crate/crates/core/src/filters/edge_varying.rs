use super::check_signal;
use crate::error::{dims, Result};
use crate::graph::{CsrMatrix, Pattern, SupportMask};
use crate::linalg::DenseMatrix;

/// Edge-varying filter `Σ_{k=0}^{K} Φ^(k:0)` with `Φ^(k:0) = Φ^(k) Φ^(k-1:0)`.
///
/// `Φ^(0)` is diagonal (stored as `phi0`); every `Φ^(k)`, `k ≥ 1`, must keep
/// its stored entries inside the support of `I + S`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVaryingFilter {
    support: Pattern,
    phi0: Vec<f64>,
    phis: Vec<CsrMatrix>,
}

impl EdgeVaryingFilter {
    /// Validates `phis` against `supp(I + S)`; a stored entry outside it is a
    /// `SupportViolation` naming the order and position.
    pub fn new(shift: &CsrMatrix, phi0: Vec<f64>, phis: Vec<CsrMatrix>) -> Result<Self> {
        let support = SupportMask::from_shift(shift).into_pattern();
        let n = support.n_rows();
        if phi0.len() != n {
            return Err(dims(format!(
                "phi0 has length {} for {n} nodes",
                phi0.len()
            )));
        }
        for (k, phi) in phis.iter().enumerate() {
            if phi.n_rows() != n || phi.n_cols() != n {
                return Err(dims(format!("parameter matrix {} is not {n}x{n}", k + 1)));
            }
            phi.check_support(&support, k + 1)?;
        }
        Ok(Self {
            support,
            phi0,
            phis,
        })
    }

    /// Filter of order `K` whose parameter matrices fill `supp(I + S)` with
    /// values drawn from `fill(order, row, col)`.
    pub fn full(
        shift: &CsrMatrix,
        order: usize,
        mut phi0: impl FnMut(usize) -> f64,
        mut fill: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let support = SupportMask::from_shift(shift).into_pattern();
        let n = support.n_rows();
        let phis = (1..=order)
            .map(|k| {
                let values = support.positions().map(|(i, j)| fill(k, i, j)).collect();
                CsrMatrix::new(support.clone(), values).expect("sizes match")
            })
            .collect();
        Self {
            phi0: (0..n).map(&mut phi0).collect(),
            support,
            phis,
        }
    }

    pub fn order(&self) -> usize {
        self.phis.len()
    }

    pub fn phi0(&self) -> &[f64] {
        &self.phi0
    }

    pub fn phis(&self) -> &[CsrMatrix] {
        &self.phis
    }

    pub fn support(&self) -> &Pattern {
        &self.support
    }

    /// Trainable scalars: `N` diagonal entries plus every stored entry of
    /// `Φ^(1..K)`; `K(M + N) + N` when the patterns are full.
    pub fn param_count(&self) -> usize {
        self.phi0.len() + self.phis.iter().map(CsrMatrix::nnz).sum::<usize>()
    }

    /// Running product: `Z_0 = diag(phi0) X`, `Z_k = Φ^(k) Z_{k-1}`, output `Σ_k Z_k`.
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.rows() != self.phi0.len() {
            return Err(dims(format!(
                "signal has {} rows for a filter on {} nodes",
                x.rows(),
                self.phi0.len()
            )));
        }
        let mut z = x.clone();
        for (i, &d) in self.phi0.iter().enumerate() {
            z.row_mut(i).iter_mut().for_each(|v| *v *= d);
        }
        let mut out = z.clone();
        for phi in &self.phis {
            z = phi.spmm(&z)?;
            out.add_assign(&z);
        }
        Ok(out)
    }

    /// Same as [`apply`](Self::apply) after checking `x` against `shift`.
    pub fn apply_on(&self, shift: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_signal(shift, x)?;
        self.apply(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn path3() -> CsrMatrix {
        CsrMatrix::from_triplets(3, 3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)])
            .unwrap()
    }

    #[test]
    fn order_zero_with_unit_diagonal_is_identity() {
        let f = EdgeVaryingFilter::new(&path3(), vec![1.0; 3], vec![]).unwrap();
        let x = DenseMatrix::from_fn(3, 2, |i, j| (i as f64) - (j as f64) * 0.5);
        assert_eq!(f.apply(&x).unwrap(), x);
    }

    #[test]
    fn off_support_entry_is_rejected() {
        let bad = CsrMatrix::from_triplets(3, 3, [(0, 2, 1.0)]).unwrap();
        match EdgeVaryingFilter::new(&path3(), vec![1.0; 3], vec![CsrMatrix::identity(3), bad]) {
            Err(Error::SupportViolation { order, row, col }) => {
                assert_eq!((order, row, col), (2, 0, 2))
            }
            other => panic!("expected support violation, got {other:?}"),
        }
    }

    #[test]
    fn diagonal_entries_are_allowed() {
        let diag = CsrMatrix::from_diagonal(&[2.0, 3.0, 4.0]);
        assert!(EdgeVaryingFilter::new(&path3(), vec![1.0; 3], vec![diag]).is_ok());
    }

    #[test]
    fn full_parameter_count() {
        // M = 4 stored off-diagonal entries, N = 3, K = 2 -> 2 * 7 + 3
        let f = EdgeVaryingFilter::full(&path3(), 2, |_| 1.0, |_, _, _| 0.1);
        assert_eq!(f.param_count(), 17);
    }
}
