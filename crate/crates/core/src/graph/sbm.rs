use rand::Rng as _;

use super::{is_connected, Graph};
use crate::error::{Error, Result};
use crate::rng::Rng;

pub const SBM_MAX_RETRIES: usize = 1000;

/// Samples an undirected, unweighted stochastic block model graph, resampling
/// the whole graph until it is connected.
///
/// Nodes are numbered block by block. Pair `(i, j)`, `i < j`, is joined with
/// probability `p_intra` when both nodes share a block and `p_inter`
/// otherwise.
pub fn sbm_generate(
    block_sizes: &[usize],
    p_intra: f64,
    p_inter: f64,
    rng: &mut Rng,
) -> Result<Graph> {
    for p in [p_intra, p_inter] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!(
                "edge probability {p} outside [0, 1]"
            )));
        }
    }
    let block_of: Vec<usize> = block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
        .collect();
    let n = block_of.len();
    for _ in 0..SBM_MAX_RETRIES {
        let mut g = Graph::new(n, false);
        for i in 0..n {
            for j in i + 1..n {
                let p = if block_of[i] == block_of[j] {
                    p_intra
                } else {
                    p_inter
                };
                if rng.gen::<f64>() < p {
                    g.add_edge(i, j, 1.0)?;
                }
            }
        }
        if is_connected(&g) {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailed {
        retries: SBM_MAX_RETRIES,
    })
}
