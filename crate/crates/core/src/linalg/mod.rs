//! Dense, analysis-scale linear algebra for the spectral and ARMA paths.

mod dense;
mod eig;
mod lu;
mod nullspace;
mod roots;

pub use dense::DenseMatrix;
pub use eig::{sym_eig, EigenDecomposition, JACOBI_MAX_SWEEPS};
pub use lu::{lu_solve, LuFactors};
pub use nullspace::{null_space_basis, NULL_SPACE_TOL};
pub use roots::{poly_eval, poly_roots, POLY_ROOTS_MAX_ITER};

use crate::error::{dims, Result};

/// Column-wise Kronecker product: column `j` of the result is
/// `kron(a[:, j], b[:, j])`, so row `p * b.rows() + q` holds `a[p, j] * b[q, j]`.
pub fn khatri_rao(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != b.cols() {
        return Err(dims(format!(
            "Khatri-Rao of {} and {} columns",
            a.cols(),
            b.cols()
        )));
    }
    let br = b.rows();
    Ok(DenseMatrix::from_fn(a.rows() * br, a.cols(), |r, j| {
        a[(r / br, j)] * b[(r % br, j)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn khatri_rao_of_rows_is_elementwise() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0]]);
        let b = DenseMatrix::from_rows(&[vec![4.0, 5.0, 6.0]]);
        assert_eq!(
            khatri_rao(&a, &b).unwrap(),
            DenseMatrix::from_rows(&[vec![4.0, 10.0, 18.0]])
        );
    }

    #[test]
    fn khatri_rao_of_identities() {
        let i2 = DenseMatrix::identity(2);
        let want = DenseMatrix::from_rows(&[
            vec![1.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 1.0],
        ]);
        assert_eq!(khatri_rao(&i2, &i2).unwrap(), want);
    }

    #[test]
    fn khatri_rao_index_formula() {
        let a = DenseMatrix::from_rows(&[vec![0.3, -1.2], vec![2.5, 0.7], vec![-0.4, 1.1]]);
        let b = DenseMatrix::from_rows(&[vec![1.9, -0.6], vec![0.2, 3.3]]);
        let kr = khatri_rao(&a, &b).unwrap();
        assert_eq!(kr.shape(), (6, 2));
        for j in 0..2 {
            for p in 0..3 {
                for q in 0..2 {
                    assert_eq!(kr[(p * 2 + q, j)], a[(p, j)] * b[(q, j)]);
                }
            }
        }
        assert!(khatri_rao(&a, &DenseMatrix::zeros(2, 3)).is_err());
    }
}
