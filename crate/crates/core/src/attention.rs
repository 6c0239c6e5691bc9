//! Attention-generated shift operators.

use serde::{Deserialize, Serialize};

use crate::error::{dims, Result};
use crate::graph::{CsrMatrix, Pattern, SupportMask};
use crate::linalg::DenseMatrix;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.2;

/// One attention mechanism: feature transform `B` and score vector `e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    pub mixing: DenseMatrix,
    pub score: Vec<f64>,
    pub leaky_slope: f64,
}

impl AttentionHead {
    pub fn new(mixing: DenseMatrix, score: Vec<f64>) -> Result<Self> {
        if score.len() != 2 * mixing.cols() {
            return Err(dims(format!(
                "score vector has length {}, expected {}",
                score.len(),
                2 * mixing.cols()
            )));
        }
        Ok(Self {
            mixing,
            score,
            leaky_slope: DEFAULT_LEAKY_SLOPE,
        })
    }

    pub fn with_slope(mut self, slope: f64) -> Self {
        self.leaky_slope = slope;
        self
    }
}

/// Row-stochastic shift on `supp(I + S)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionShift(CsrMatrix);

impl AttentionShift {
    pub fn matrix(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CsrMatrix {
        self.0
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.0.n_rows())
            .map(|i| self.0.row(i).map(|(_, v)| v).sum())
            .collect()
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Scores `σ(e_own · h_i + e_nbr · h_j)` for every position `(i, j)` of
/// `pattern`, in CSR order, from projected features `h = X B`.
pub fn scores_from_projection(
    projected: &DenseMatrix,
    score: &[f64],
    slope: f64,
    pattern: &Pattern,
) -> Result<Vec<f64>> {
    let f = projected.cols();
    if score.len() != 2 * f {
        return Err(dims(format!(
            "score vector has length {} for {f} features",
            score.len()
        )));
    }
    if projected.rows() != pattern.n_rows() {
        return Err(dims("projected features do not match the pattern"));
    }
    let (own, nbr) = score.split_at(f);
    let dot =
        |w: &[f64], i: usize| -> f64 { projected.row(i).iter().zip(w).map(|(a, b)| a * b).sum() };
    let own_part: Vec<f64> = (0..projected.rows()).map(|i| dot(own, i)).collect();
    let nbr_part: Vec<f64> = (0..projected.rows()).map(|i| dot(nbr, i)).collect();
    Ok(pattern
        .positions()
        .map(|(i, j)| leaky(own_part[i] + nbr_part[j], slope))
        .collect())
}

pub fn edge_scores(
    head: &AttentionHead,
    x: &DenseMatrix,
    support: &SupportMask,
) -> Result<Vec<f64>> {
    if x.cols() != head.mixing.rows() {
        return Err(dims(format!(
            "features have {} columns, head expects {}",
            x.cols(),
            head.mixing.rows()
        )));
    }
    let projected = x.matmul(&head.mixing)?;
    scores_from_projection(&projected, &head.score, head.leaky_slope, support)
}

/// Softmax of `values` within each row of `pattern`, with the row maximum
/// subtracted first.
pub fn softmax_on_pattern(values: &[f64], pattern: &Pattern) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    for i in 0..pattern.n_rows() {
        let r = pattern.row_range(i);
        if r.is_empty() {
            continue;
        }
        let row = &values[r.clone()];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, &v) in out[r.clone()].iter_mut().zip(row) {
            *o = (v - m).exp();
            total += *o;
        }
        out[r].iter_mut().for_each(|o| *o /= total);
    }
    out
}

pub fn neighborhood_softmax(scores: &[f64], support: &SupportMask) -> Result<AttentionShift> {
    if scores.len() != support.nnz() {
        return Err(dims(format!(
            "{} scores for {} support positions",
            scores.len(),
            support.nnz()
        )));
    }
    let values = softmax_on_pattern(scores, support);
    Ok(AttentionShift(CsrMatrix::new(
        support.pattern().clone(),
        values,
    )?))
}

/// Weights `s_ij` aligned with `supp(I + S)`; a zero diagonal entry of `S`
/// is read as `s_ii = 1`.
pub fn softmax_weights(s: &CsrMatrix) -> Vec<f64> {
    let support = SupportMask::from_shift(s);
    support
        .positions()
        .map(|(i, j)| {
            let v = s.get(i, j);
            if i == j && v == 0.0 {
                1.0
            } else {
                v
            }
        })
        .collect()
}

/// `Φ_ij ∝ exp(s_ij α_ij)` over `N_i ∪ {i}`.
pub fn weighted_neighborhood_softmax(scores: &[f64], s: &CsrMatrix) -> Result<AttentionShift> {
    let support = SupportMask::from_shift(s);
    if scores.len() != support.nnz() {
        return Err(dims(format!(
            "{} scores for {} support positions",
            scores.len(),
            support.nnz()
        )));
    }
    let weighted: Vec<f64> = scores
        .iter()
        .zip(softmax_weights(s))
        .map(|(a, w)| a * w)
        .collect();
    neighborhood_softmax(&weighted, &support)
}

/// One attention shift per layer, shared by every power of the filter.
pub fn gcat_shift(
    head: &AttentionHead,
    x: &DenseMatrix,
    support: &SupportMask,
) -> Result<AttentionShift> {
    neighborhood_softmax(&edge_scores(head, x, support)?, support)
}

/// Independent `Φ^(k)` for each head, `k = 0..K`.
pub fn edge_varying_gat_shifts(
    heads: &[AttentionHead],
    x: &DenseMatrix,
    support: &SupportMask,
) -> Result<Vec<AttentionShift>> {
    heads.iter().map(|h| gcat_shift(h, x, support)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> CsrMatrix {
        let t: Vec<_> = (0..4)
            .flat_map(|i| [(i, (i + 1) % 4, 0.5), ((i + 1) % 4, i, 0.5)])
            .collect();
        CsrMatrix::from_triplets(4, 4, t).unwrap()
    }

    fn head(seed: f64) -> AttentionHead {
        AttentionHead::new(
            DenseMatrix::from_fn(3, 2, |i, j| ((i * 2 + j) as f64 * seed).sin()),
            vec![0.3 * seed, -0.8, 0.5, 1.1 * seed],
        )
        .unwrap()
    }

    fn features() -> DenseMatrix {
        DenseMatrix::from_fn(4, 3, |i, j| (i as f64 - j as f64 * 0.7).cos())
    }

    #[test]
    fn zero_score_vector_gives_zero_scores() {
        let mut h = head(1.0);
        h.score = vec![0.0; 4];
        let sup = SupportMask::from_shift(&square());
        assert!(edge_scores(&h, &features(), &sup)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let zero = DenseMatrix::zeros(4, 3);
        assert!(edge_scores(&head(1.0), &zero, &sup)
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn scores_match_per_edge_loop() {
        let h = head(0.9);
        let x = features();
        let sup = SupportMask::from_shift(&square());
        let got = edge_scores(&h, &x, &sup).unwrap();
        let xb = x.matmul(&h.mixing).unwrap();
        for ((i, j), g) in sup.positions().zip(&got) {
            let mut z = 0.0;
            for f in 0..2 {
                z += h.score[f] * xb[(i, f)] + h.score[2 + f] * xb[(j, f)];
            }
            let want = if z > 0.0 { z } else { 0.2 * z };
            assert!((g - want).abs() < 1e-13);
        }
    }

    #[test]
    fn uniform_and_saturated_rows() {
        let sup = SupportMask::from_shift(&square());
        let phi = neighborhood_softmax(&vec![0.7; sup.nnz()], &sup).unwrap();
        assert!(phi
            .matrix()
            .values()
            .iter()
            .all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let mut scores = vec![0.0; sup.nnz()];
        scores[0] = 50.0;
        let phi = neighborhood_softmax(&scores, &sup).unwrap();
        assert!(phi.matrix().values()[0] > 1.0 - 1e-9);
    }

    #[test]
    fn weighted_reductions() {
        let s = square();
        let sup = SupportMask::from_shift(&s);
        let scores: Vec<f64> = (0..sup.nnz()).map(|k| (k as f64 * 0.37).sin()).collect();
        let ones = CsrMatrix::new(sup.pattern().clone(), vec![1.0; sup.nnz()]).unwrap();
        let ones_offdiag = ones.add(&CsrMatrix::identity(4).scale(-1.0)).unwrap();
        let a = weighted_neighborhood_softmax(&scores, &ones_offdiag).unwrap();
        let b = neighborhood_softmax(&scores, &sup).unwrap();
        assert!(a.matrix().to_dense().max_abs_diff(&b.matrix().to_dense()) < 1e-15);
        let z = weighted_neighborhood_softmax(&vec![0.0; sup.nnz()], &s).unwrap();
        assert!(z
            .matrix()
            .values()
            .iter()
            .all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
    }

    #[test]
    fn gcat_rows_stochastic_on_support() {
        let s = square();
        let sup = SupportMask::from_shift(&s);
        let phi = gcat_shift(&head(1.3), &features(), &sup).unwrap();
        assert_eq!(phi.matrix().pattern(), sup.pattern());
        assert!(phi.row_sums().iter().all(|r| (r - 1.0).abs() < 1e-12));
    }

    #[test]
    fn identical_heads_give_identical_shifts() {
        let sup = SupportMask::from_shift(&square());
        let shifts =
            edge_varying_gat_shifts(&[head(0.5), head(0.5), head(0.5)], &features(), &sup).unwrap();
        assert!(shifts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn score_length_validated() {
        assert!(AttentionHead::new(DenseMatrix::zeros(3, 2), vec![0.0; 3]).is_err());
    }
}
