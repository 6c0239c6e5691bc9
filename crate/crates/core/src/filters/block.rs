use super::check_signal;
use crate::error::{dims, Error, Result};
use crate::graph::CsrMatrix;
use crate::linalg::DenseMatrix;

/// Block-varying filter `Σ_k diag(C_B a_B^(k)) S^k`: node `i` uses the
/// coefficients of its block.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVaryingFilter {
    block_of_node: Vec<usize>,
    /// `B x (K+1)`, row `b` holds the coefficients of block `b`.
    coeffs: DenseMatrix,
}

impl BlockVaryingFilter {
    pub fn new(block_of_node: Vec<usize>, coeffs: DenseMatrix) -> Result<Self> {
        let blocks = coeffs.rows();
        if coeffs.cols() == 0 {
            return Err(Error::InvalidArgument(
                "block filter needs order >= 0".into(),
            ));
        }
        let mut used = vec![false; blocks];
        for (i, &b) in block_of_node.iter().enumerate() {
            if b >= blocks {
                return Err(Error::InvalidArgument(format!(
                    "node {i} assigned to block {b} of {blocks}"
                )));
            }
            used[b] = true;
        }
        if let Some(b) = used.iter().position(|u| !u) {
            return Err(Error::InvalidArgument(format!("block {b} has no nodes")));
        }
        Ok(Self {
            block_of_node,
            coeffs,
        })
    }

    pub fn blocks(&self) -> usize {
        self.coeffs.rows()
    }

    pub fn order(&self) -> usize {
        self.coeffs.cols() - 1
    }

    pub fn block_of_node(&self) -> &[usize] {
        &self.block_of_node
    }

    pub fn coeffs(&self) -> &DenseMatrix {
        &self.coeffs
    }

    pub fn param_count(&self) -> usize {
        self.coeffs.rows() * self.coeffs.cols()
    }

    pub fn apply(&self, s: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_signal(s, x)?;
        if x.rows() != self.block_of_node.len() {
            return Err(dims(format!(
                "signal has {} rows, partition covers {} nodes",
                x.rows(),
                self.block_of_node.len()
            )));
        }
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        let mut power = x.clone();
        for k in 0..self.coeffs.cols() {
            if k > 0 {
                power = s.spmm(&power)?;
            }
            for (i, &b) in self.block_of_node.iter().enumerate() {
                let a = self.coeffs[(b, k)];
                let src = power.row(i);
                for (o, p) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * p;
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::PolynomialFilter;

    fn cycle(n: usize) -> CsrMatrix {
        CsrMatrix::from_triplets(
            n,
            n,
            (0..n)
                .flat_map(|i| [(i, (i + 1) % n, 0.5), ((i + 1) % n, i, 0.5)])
                .collect::<Vec<_>>(),
        )
        .unwrap()
    }

    #[test]
    fn single_block_is_polynomial() {
        let s = cycle(5);
        let x = DenseMatrix::from_fn(5, 2, |i, j| ((i * 3 + j) % 4) as f64 - 1.5);
        let coeffs = vec![0.3, -1.0, 0.25];
        let blk =
            BlockVaryingFilter::new(vec![0; 5], DenseMatrix::from_rows(std::slice::from_ref(&coeffs))).unwrap();
        let poly = PolynomialFilter::new(coeffs).unwrap();
        assert!(
            blk.apply(&s, &x)
                .unwrap()
                .max_abs_diff(&poly.apply(&s, &x).unwrap())
                < 1e-15
        );
    }

    #[test]
    fn zero_block_rows_are_zero() {
        let s = cycle(4);
        let x = DenseMatrix::from_fn(4, 1, |i, _| i as f64 + 1.0);
        let f = BlockVaryingFilter::new(
            vec![0, 1, 0, 1],
            DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]),
        )
        .unwrap();
        let y = f.apply(&s, &x).unwrap();
        assert_eq!(y[(1, 0)], 0.0);
        assert_eq!(y[(3, 0)], 0.0);
        assert!(y[(0, 0)] != 0.0);
    }

    #[test]
    fn empty_block_rejected() {
        assert!(BlockVaryingFilter::new(vec![0, 0], DenseMatrix::zeros(2, 1)).is_err());
        assert!(BlockVaryingFilter::new(vec![0, 2], DenseMatrix::zeros(2, 1)).is_err());
    }
}
