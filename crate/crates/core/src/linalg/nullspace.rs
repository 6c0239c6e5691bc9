use super::DenseMatrix;

/// Default relative tolerance for null-space rank decisions.
pub const NULL_SPACE_TOL: f64 = 1e-10;

/// Orthonormal basis (as columns) of the numerical null space of `a`.
///
/// Runs Householder QR with column pivoting on `aᵀ`: `aᵀ Π = Q R`. The
/// leading `r` columns of `Q` span the row space of `a`, where `r` is the
/// number of pivots whose remaining column norm exceeds `tol · ‖a‖_max`; the
/// trailing `n - r` columns of `Q` are returned. Every returned `x` satisfies
/// `‖a x‖_max ≤ tol · ‖a‖_max` because the rows of `R` past `r` are bounded by
/// the last rejected pivot.
pub fn null_space_basis(a: &DenseMatrix, tol: f64) -> DenseMatrix {
    let n = a.cols();
    let m = a.rows();
    let anorm = a.max_abs();
    if anorm == 0.0 || m == 0 {
        return DenseMatrix::identity(n);
    }
    let threshold = tol * anorm;

    // Work on aᵀ (n x m): columns are the rows of `a`.
    let mut w = a.transpose();
    let mut col_norm2: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| w[(i, j)] * w[(i, j)]).sum())
        .collect();
    // Householder vectors, stored so Q can be formed afterwards.
    let mut reflectors: Vec<(usize, Vec<f64>, f64)> = Vec::new();
    let steps = n.min(m);
    let mut rank = 0;
    for k in 0..steps {
        // Recompute norms of the trailing block exactly; cheap at these sizes
        // and avoids the cancellation of downdating.
        for (j, cn) in col_norm2.iter_mut().enumerate().skip(k) {
            *cn = (k..n).map(|i| w[(i, j)] * w[(i, j)]).sum();
        }
        let (pivot, &best) = col_norm2[k..]
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
            .map(|(j, v)| (j + k, v))
            .unwrap();
        if best.sqrt() <= threshold {
            break;
        }
        if pivot != k {
            for i in 0..n {
                let tmp = w[(i, k)];
                w[(i, k)] = w[(i, pivot)];
                w[(i, pivot)] = tmp;
            }
            col_norm2.swap(k, pivot);
        }
        // Householder reflector for w[k.., k].
        let x: Vec<f64> = (k..n).map(|i| w[(i, k)]).collect();
        let alpha = -x[0].signum() * best.sqrt();
        let alpha = if x[0] == 0.0 { -best.sqrt() } else { alpha };
        let mut v = x;
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        if vnorm2 > 0.0 {
            let beta = 2.0 / vnorm2;
            for j in k..m {
                let dot: f64 = (k..n).map(|i| v[i - k] * w[(i, j)]).sum();
                for i in k..n {
                    w[(i, j)] -= beta * dot * v[i - k];
                }
            }
            reflectors.push((k, v, beta));
        }
        rank = k + 1;
    }

    // Q = H_0 H_1 ... H_{r-1}; the null basis is Q[:, rank..].
    let b = n - rank;
    let mut basis = DenseMatrix::zeros(n, b);
    for c in 0..b {
        basis[(rank + c, c)] = 1.0;
    }
    for (k, v, beta) in reflectors.iter().rev() {
        for c in 0..b {
            let dot: f64 = (*k..n).map(|i| v[i - k] * basis[(i, c)]).sum();
            for i in *k..n {
                basis[(i, c)] -= beta * dot * v[i - k];
            }
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_has_full_null_space() {
        assert_eq!(
            null_space_basis(&DenseMatrix::zeros(2, 3), NULL_SPACE_TOL),
            DenseMatrix::identity(3)
        );
    }

    #[test]
    fn identity_has_trivial_null_space() {
        let b = null_space_basis(&DenseMatrix::identity(3), NULL_SPACE_TOL);
        assert_eq!(b.shape(), (3, 0));
    }

    #[test]
    fn hand_row_reduced_example() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
        let b = null_space_basis(&a, NULL_SPACE_TOL);
        assert_eq!(b.shape(), (3, 1));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let sign = b[(0, 0)].signum();
        assert!((b[(0, 0)] - sign * s).abs() < 1e-12);
        assert!((b[(1, 0)] + sign * s).abs() < 1e-12);
        assert!(b[(2, 0)].abs() < 1e-12);
    }

    #[test]
    fn rank_deficient_wide_matrix() {
        // third row = first + second
        let a = DenseMatrix::from_rows(&[
            vec![1.0, 2.0, 0.0, -1.0],
            vec![0.0, 1.0, 1.0, 3.0],
            vec![1.0, 3.0, 1.0, 2.0],
        ]);
        let b = null_space_basis(&a, NULL_SPACE_TOL);
        assert_eq!(b.cols(), 2);
        assert!(a.matmul(&b).unwrap().max_abs() < 1e-12);
        let gram = b.transpose().matmul(&b).unwrap();
        assert!(gram.max_abs_diff(&DenseMatrix::identity(2)) < 1e-12);
    }
}
