use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{normalize_shift, CsrMatrix, Normalization};
use crate::linalg::DenseMatrix;

/// Pearson correlation of rows `a` and `b` over the columns where both are
/// nonzero. `None` with fewer than two such columns or zero variance.
pub fn pearson_similarity(a: &[f64], b: &[f64]) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| **x != 0.0 && **y != 0.0)
        .map(|(x, y)| (*x, *y))
        .collect();
    if pairs.len() < 2 {
        return None;
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Similarity graph over the rows of `ratings`, before normalization.
///
/// Each row keeps its `top_k` most similar rows (ties to the lower index);
/// an edge kept by either endpoint takes the larger of the two directed
/// values, so the result is symmetric.
#[allow(clippy::needless_range_loop)]
pub fn similarity_adjacency(ratings: &DenseMatrix, top_k: usize) -> Result<CsrMatrix> {
    let n = ratings.rows();
    let mut sim = vec![vec![None; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let s = pearson_similarity(ratings.row(i), ratings.row(j));
            sim[i][j] = s;
            sim[j][i] = s;
        }
    }
    let mut kept: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, row) in sim.iter().enumerate() {
        let mut cands: Vec<(usize, f64)> = row
            .iter()
            .enumerate()
            .filter_map(|(j, s)| s.map(|v| (j, v)))
            .collect();
        cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        for &(j, v) in cands.iter().take(top_k) {
            for key in [(i, j), (j, i)] {
                let e = kept.entry(key).or_insert(v);
                *e = e.max(v);
            }
        }
    }
    CsrMatrix::from_triplets(
        n,
        n,
        kept.into_iter().map(|((i, j), v)| (i, j, v)).collect::<Vec<_>>(),
    )
}

/// Top-`k` Pearson graph normalized by its dominant eigenvalue magnitude.
pub fn build_similarity_graph(ratings: &DenseMatrix, top_k: usize) -> Result<CsrMatrix> {
    let adj = similarity_adjacency(ratings, top_k)?;
    if adj.nnz() == 0 {
        return Err(Error::InvalidArgument(
            "no pair of rows has two co-rated entries with nonzero variance".into(),
        ));
    }
    normalize_shift(adj, Normalization::MaxEigenvalue)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_opposite() {
        let a = [1.0, 2.0, 3.0, 0.0];
        assert!((pearson_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        let b = [5.0, 4.0, 3.0, 2.0];
        assert!((pearson_similarity(&a, &b).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(pearson_similarity(&[1.0, 0.0], &[1.0, 1.0]), None);
        assert_eq!(pearson_similarity(&[2.0, 2.0], &[1.0, 3.0]), None);
    }

    #[test]
    fn toy_matrix_matches_hand_formula() {
        let r = DenseMatrix::from_rows(&[
            vec![5.0, 3.0, 0.0, 1.0],
            vec![4.0, 0.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0, 5.0],
            vec![1.0, 0.0, 0.0, 4.0],
            vec![0.0, 1.0, 5.0, 4.0],
        ]);
        let adj = similarity_adjacency(&r, 4).unwrap();
        // rows 0 and 2 share columns 0, 1, 3: (5,3,1) vs (1,1,5)
        let (x, y) = ([5.0, 3.0, 1.0], [1.0, 1.0, 5.0]);
        let (mx, my) = (3.0, 7.0 / 3.0);
        let num: f64 = (0..3).map(|k| (x[k] - mx) * (y[k] - my)).sum();
        let dx: f64 = (0..3).map(|k| (x[k] - mx) * (x[k] - mx)).sum();
        let dy: f64 = (0..3).map(|k| (y[k] - my) * (y[k] - my)).sum();
        assert!((adj.get(0, 2) - num / (dx * dy).sqrt()).abs() < 1e-12);
        assert!(adj.is_symmetric(0.0));
        assert_eq!(adj.get(0, 0), 0.0);
    }

    #[test]
    fn top_k_prunes_then_symmetrizes() {
        let r = DenseMatrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![1.0, 2.0, 3.5],
            vec![3.0, 2.0, 1.0],
            vec![1.0, 2.5, 3.0],
        ]);
        let adj = similarity_adjacency(&r, 1).unwrap();
        assert!(adj.is_symmetric(0.0));
        for i in 0..4 {
            assert!(adj.row(i).count() >= 1);
        }
        let g = build_similarity_graph(&r, 1).unwrap();
        let lam = crate::graph::power_iteration_lambda_max(&g, 1e-12, 10_000).unwrap();
        assert!((lam - 1.0).abs() < 1e-9);
    }
}
