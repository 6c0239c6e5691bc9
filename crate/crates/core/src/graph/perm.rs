use rand::seq::SliceRandom;

use super::CsrMatrix;
use crate::error::{dims, Error, Result};
use crate::linalg::DenseMatrix;
use crate::rng::Rng;

/// Node relabeling. Entry `i` of the permuted object is taken from entry
/// `map[i]` of the original, i.e. the action of `Pᵀ` with `P e_i = e_map[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &m in &map {
            if m >= map.len() || seen[m] {
                return Err(Error::InvalidPermutation(format!(
                    "{map:?} is not a bijection on 0..{}",
                    map.len()
                )));
            }
            seen[m] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn random(n: usize, rng: &mut Rng) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        map.shuffle(rng);
        Self { map }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.map.len()];
        for (i, &m) in self.map.iter().enumerate() {
            inv[m] = i;
        }
        Self { map: inv }
    }
}

/// `Pᵀ S P`: entry `(i, j)` of the result is `S[map(i), map(j)]`.
pub fn permute_shift(s: &CsrMatrix, p: &Permutation) -> Result<CsrMatrix> {
    if !s.is_square() || s.n_rows() != p.len() {
        return Err(dims(format!(
            "permutation of length {} for a {}x{} matrix",
            p.len(),
            s.n_rows(),
            s.n_cols()
        )));
    }
    let inv = p.inverse();
    let mut trip = Vec::with_capacity(s.nnz());
    for (new_i, &old_i) in p.map().iter().enumerate() {
        for (old_j, v) in s.row(old_i) {
            trip.push((new_i, inv.map()[old_j], v));
        }
    }
    CsrMatrix::from_triplets(s.n_rows(), s.n_cols(), trip)
}

/// `Pᵀ x`.
pub fn permute_signal(x: &[f64], p: &Permutation) -> Result<Vec<f64>> {
    if x.len() != p.len() {
        return Err(dims(format!(
            "permutation of length {} for a signal of length {}",
            p.len(),
            x.len()
        )));
    }
    Ok(p.map().iter().map(|&m| x[m]).collect())
}

/// `Pᵀ X` for a node-by-feature matrix.
pub fn permute_rows(x: &DenseMatrix, p: &Permutation) -> Result<DenseMatrix> {
    if x.rows() != p.len() {
        return Err(dims(format!(
            "permutation of length {} for {} rows",
            p.len(),
            x.rows()
        )));
    }
    Ok(DenseMatrix::from_fn(x.rows(), x.cols(), |i, j| {
        x[(p.map()[i], j)]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> CsrMatrix {
        CsrMatrix::from_triplets(3, 3, [(0, 1, 1.0), (1, 0, 1.0), (1, 2, 2.0), (2, 1, 2.0)])
            .unwrap()
    }

    #[test]
    fn rejects_non_bijections() {
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3, 1]).is_err());
        assert!(Permutation::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn identity_leaves_shift_unchanged() {
        let s = path3();
        assert_eq!(permute_shift(&s, &Permutation::identity(3)).unwrap(), s);
    }

    #[test]
    fn inverse_restores_exactly() {
        let s = path3();
        let p = Permutation::new(vec![2, 0, 1]).unwrap();
        let back = permute_shift(&permute_shift(&s, &p).unwrap(), &p.inverse()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn three_cycle_matches_dense_permutation_matrix() {
        let s = path3();
        let p = Permutation::new(vec![1, 2, 0]).unwrap();
        // P has P e_i = e_map[i], so column i of P is e_map[i].
        let pm = DenseMatrix::from_fn(3, 3, |r, c| if r == p.map()[c] { 1.0 } else { 0.0 });
        let want = pm
            .transpose()
            .matmul(&s.to_dense())
            .unwrap()
            .matmul(&pm)
            .unwrap();
        assert_eq!(permute_shift(&s, &p).unwrap().to_dense(), want);
        let x = [1.0, 2.0, 3.0];
        let px = pm.transpose().matvec(&x).unwrap();
        assert_eq!(permute_signal(&x, &p).unwrap(), px);
    }

    #[test]
    fn size_mismatch_is_an_error() {
        assert!(permute_shift(&path3(), &Permutation::identity(4)).is_err());
        assert!(permute_signal(&[1.0], &Permutation::identity(2)).is_err());
    }
}
