use super::check_signal;
use crate::error::{dims, Error, Result};
use crate::graph::{CsrMatrix, Pattern};
use crate::linalg::DenseMatrix;

/// Hybrid filter `Σ_k (Π_{k'≤k} Φ_I^(k') + a_k S^k)`.
///
/// `Φ_I^(0)` is diagonal with entries only at the important nodes; for
/// `k ≥ 1`, `Φ_I^(k)` may only hold entries in rows of important nodes and at
/// edges of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridFilter {
    important: Vec<usize>,
    masked_phis: Vec<CsrMatrix>,
    global_coeffs: Vec<f64>,
}

impl HybridFilter {
    pub fn new(
        shift: &CsrMatrix,
        important: Vec<usize>,
        masked_phis: Vec<CsrMatrix>,
        global_coeffs: Vec<f64>,
    ) -> Result<Self> {
        let n = shift.n_rows();
        if global_coeffs.is_empty() || masked_phis.len() != global_coeffs.len() {
            return Err(dims(format!(
                "{} masked matrices for {} global coefficients",
                masked_phis.len(),
                global_coeffs.len()
            )));
        }
        let mut is_important = vec![false; n];
        for &i in &important {
            if i >= n {
                return Err(Error::InvalidArgument(format!("important node {i} >= {n}")));
            }
            is_important[i] = true;
        }
        let diag_mask = Self::diagonal_mask(n, &is_important);
        let edge_mask = Self::edge_mask(shift, &is_important);
        for (k, phi) in masked_phis.iter().enumerate() {
            if phi.n_rows() != n || phi.n_cols() != n {
                return Err(dims(format!("masked matrix {k} is not {n}x{n}")));
            }
            phi.check_support(if k == 0 { &diag_mask } else { &edge_mask }, k)?;
        }
        let mut important = important;
        important.sort_unstable();
        important.dedup();
        Ok(Self {
            important,
            masked_phis,
            global_coeffs,
        })
    }

    /// Full masks filled from `fill(order, row, col)`.
    pub fn full(
        shift: &CsrMatrix,
        important: Vec<usize>,
        global_coeffs: Vec<f64>,
        mut fill: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let n = shift.n_rows();
        let mut is_important = vec![false; n];
        for &i in &important {
            if i >= n {
                return Err(Error::InvalidArgument(format!("important node {i} >= {n}")));
            }
            is_important[i] = true;
        }
        let masks = (0..global_coeffs.len()).map(|k| {
            if k == 0 {
                Self::diagonal_mask(n, &is_important)
            } else {
                Self::edge_mask(shift, &is_important)
            }
        });
        let phis = masks
            .enumerate()
            .map(|(k, m)| {
                let values = m.positions().map(|(i, j)| fill(k, i, j)).collect();
                CsrMatrix::new(m, values).expect("sizes match")
            })
            .collect();
        Self::new(shift, important, phis, global_coeffs)
    }

    pub(crate) fn diagonal_mask(n: usize, is_important: &[bool]) -> Pattern {
        Pattern::diagonal(n).filter(|i, _| is_important[i])
    }

    /// Off-diagonal entries of `S` in rows of important nodes.
    pub(crate) fn edge_mask(shift: &CsrMatrix, is_important: &[bool]) -> Pattern {
        shift.pattern().filter(|i, j| i != j && is_important[i])
    }

    pub fn important(&self) -> &[usize] {
        &self.important
    }

    pub fn masked_phis(&self) -> &[CsrMatrix] {
        &self.masked_phis
    }

    pub fn global_coeffs(&self) -> &[f64] {
        &self.global_coeffs
    }

    pub fn order(&self) -> usize {
        self.global_coeffs.len() - 1
    }

    /// `I + K M_I + K + 1` with full masks.
    pub fn param_count(&self) -> usize {
        self.masked_phis.iter().map(CsrMatrix::nnz).sum::<usize>() + self.global_coeffs.len()
    }

    pub fn apply(&self, s: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_signal(s, x)?;
        let mut z = self.masked_phis[0].spmm(x)?;
        let mut out = z.scale(1.0);
        out.axpy(self.global_coeffs[0], x);
        let mut power = x.clone();
        for (phi, &a) in self.masked_phis[1..].iter().zip(&self.global_coeffs[1..]) {
            z = phi.spmm(&z)?;
            out.add_assign(&z);
            power = s.spmm(&power)?;
            out.axpy(a, &power);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{EdgeVaryingFilter, PolynomialFilter};

    fn star() -> CsrMatrix {
        CsrMatrix::from_triplets(
            4,
            4,
            (1..4)
                .flat_map(|l| [(0, l, 0.5), (l, 0, 0.5)])
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn empty_important_set_is_polynomial() {
        let s = star();
        let g = vec![0.5, -1.0, 2.0];
        let h = HybridFilter::full(&s, vec![], g.clone(), |_, _, _| 1.0).unwrap();
        assert_eq!(h.param_count(), 3);
        let x = DenseMatrix::from_fn(4, 2, |i, j| i as f64 * 0.3 - j as f64);
        let want = PolynomialFilter::new(g).unwrap().apply(&s, &x).unwrap();
        assert!(h.apply(&s, &x).unwrap().max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn all_nodes_and_zero_global_is_edge_varying() {
        let s = star();
        let val = |k: usize, i: usize, j: usize| 0.1 * (k + 1) as f64 + 0.01 * (i * 4 + j) as f64;
        let h = HybridFilter::full(&s, (0..4).collect(), vec![0.0; 3], val).unwrap();
        let ev = EdgeVaryingFilter::new(
            &s,
            (0..4).map(|i| val(0, i, i)).collect(),
            h.masked_phis()[1..].to_vec(),
        )
        .unwrap();
        let x = DenseMatrix::from_fn(4, 1, |i, _| 1.0 + i as f64);
        assert!(
            h.apply(&s, &x)
                .unwrap()
                .max_abs_diff(&ev.apply(&x).unwrap())
                < 1e-15
        );
    }

    #[test]
    fn rows_outside_important_set_rejected() {
        let s = star();
        let bad = CsrMatrix::from_triplets(4, 4, [(1, 0, 1.0)]).unwrap();
        let d0 = CsrMatrix::from_triplets(4, 4, [(0, 0, 1.0)]).unwrap();
        assert!(matches!(
            HybridFilter::new(&s, vec![0], vec![d0.clone(), bad], vec![0.0, 0.0]),
            Err(Error::SupportViolation {
                order: 1,
                row: 1,
                col: 0
            })
        ));
        // Φ^(0) must be diagonal on I
        let off = CsrMatrix::from_triplets(4, 4, [(1, 1, 1.0)]).unwrap();
        assert!(HybridFilter::new(&s, vec![0], vec![off], vec![0.0]).is_err());
    }

    #[test]
    fn parameter_count_formula() {
        // I = {0}: M_I = 3 neighbours, K = 2 -> 1 + 2*3 + 3
        let h = HybridFilter::full(&star(), vec![0], vec![0.0; 3], |_, _, _| 1.0).unwrap();
        assert_eq!(h.param_count(), 10);
    }
}
