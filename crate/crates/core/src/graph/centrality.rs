use serde::{Deserialize, Serialize};

use super::CsrMatrix;
use crate::error::{dims, Error, Result};

/// `δ = Σ_{k=0}^{K} S^k 1`, built from `K` repeated products with the ones vector.
pub fn diffusion_centrality(s: &CsrMatrix, order: usize) -> Result<Vec<f64>> {
    if !s.is_square() {
        return Err(dims("diffusion centrality needs a square shift"));
    }
    let mut power = vec![1.0; s.n_rows()];
    let mut acc = power.clone();
    for _ in 0..order {
        power = s.spmv(&power)?;
        acc.iter_mut().zip(&power).for_each(|(a, p)| *a += p);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeSelection {
    #[default]
    Degree,
    DiffusionCentrality,
}

/// Top-`count` nodes by score, highest first, ties broken toward the lower index.
///
/// Degree is the number of stored entries in the node's row of `S`.
pub fn select_nodes(
    s: &CsrMatrix,
    strategy: NodeSelection,
    count: usize,
    centrality_order: usize,
) -> Result<Vec<usize>> {
    let n = s.n_rows();
    if count > n {
        return Err(Error::CountTooLarge {
            count,
            available: n,
        });
    }
    let scores: Vec<f64> = match strategy {
        NodeSelection::Degree => s.row_nnz().into_iter().map(|d| d as f64).collect(),
        NodeSelection::DiffusionCentrality => diffusion_centrality(s, centrality_order)?,
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(count);
    Ok(order)
}
