use super::DenseMatrix;
use crate::error::{dims, Error, Result};

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// `S = V diag(λ) Vᵀ` with eigenvalues ascending and orthonormal columns in `V`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

impl EigenDecomposition {
    /// `V diag(λ) Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(&self.eigenvalues)
    }

    /// `V diag(response) Vᵀ` for an arbitrary spectral response.
    pub fn reconstruct_with(&self, response: &[f64]) -> DenseMatrix {
        let v = &self.eigenvectors;
        let n = v.rows();
        DenseMatrix::from_fn(n, n, |i, j| {
            (0..response.len())
                .map(|k| v[(i, k)] * response[k] * v[(j, k)])
                .sum()
        })
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps over all `(p, q)` pairs until the off-diagonal Frobenius norm falls
/// below `1e-12 · ‖S‖_F`.
pub fn sym_eig(s: &DenseMatrix) -> Result<EigenDecomposition> {
    let n = s.rows();
    if s.cols() != n {
        return Err(dims(format!(
            "eigendecomposition of a {}x{} matrix",
            n,
            s.cols()
        )));
    }
    let scale = s.max_abs().max(1.0);
    let mut asym: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            asym = asym.max((s[(i, j)] - s[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }

    let mut a = DenseMatrix::from_fn(n, n, |i, j| 0.5 * (s[(i, j)] + s[(j, i)]));
    let mut v = DenseMatrix::identity(n);
    let target = 1e-12 * a.frobenius_norm();

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                rotate(&mut a, &mut v, p, q, c, sn);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > target {
        return Err(Error::NoConvergence {
            what: "Jacobi eigenvalue sweeps",
            iterations: JACOBI_MAX_SWEEPS,
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
    Ok(EigenDecomposition {
        eigenvalues: order.iter().map(|&k| a[(k, k)]).collect(),
        eigenvectors: v.select_columns(&order),
    })
}

fn off_diagonal_norm(a: &DenseMatrix) -> f64 {
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += a[(i, j)] * a[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// `A ← Jᵀ A J`, `V ← V J` for the rotation in the `(p, q)` plane that zeroes `A[p, q]`.
fn rotate(a: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}
