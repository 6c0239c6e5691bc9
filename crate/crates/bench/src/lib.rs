//! Shared fixtures for the criterion benches.

use edgenet::graph::{build_shift, sbm_generate, CsrMatrix, Normalization};
use edgenet::linalg::DenseMatrix;
use edgenet::rng::seeded;

/// Normalized SBM shift with `n` nodes in five equal communities.
pub fn sbm_shift(n: usize, seed: u64) -> CsrMatrix {
    let sizes = vec![n / 5; 5];
    let graph = sbm_generate(&sizes, 0.8, 0.2, &mut seeded(seed)).expect("connected SBM");
    build_shift(&graph, Normalization::MaxEigenvalue).expect("nonempty graph")
}

/// Deterministic dense signal.
pub fn signal(rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |i, j| ((i * 31 + j * 7) as f64 * 0.37).sin())
}
