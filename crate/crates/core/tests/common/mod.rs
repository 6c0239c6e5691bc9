#![allow(dead_code)]

use edgenet::graph::CsrMatrix;
use edgenet::linalg::DenseMatrix;
use edgenet::rng::{seeded, Rng};
use rand::Rng as _;

/// Symmetric weighted graph on `n` nodes drawn from `seed`; edge density
/// `p`, optional random diagonal.
pub fn sym_graph(n: usize, p: f64, self_loops: bool, seed: u64) -> CsrMatrix {
    let mut rng = seeded(seed);
    let mut t = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                let w = rng.gen_range(0.1..1.0);
                t.push((i, j, w));
                t.push((j, i, w));
            }
        }
        if self_loops {
            t.push((i, i, rng.gen_range(-0.5..0.5)));
        }
    }
    CsrMatrix::from_triplets(n, n, t).unwrap().scale(1.0 / n as f64)
}

/// Square sparse matrix with no symmetry.
pub fn any_sparse(n: usize, p: f64, seed: u64) -> CsrMatrix {
    let mut rng = seeded(seed);
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if rng.gen_bool(p) {
                t.push((i, j, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, t).unwrap()
}

pub fn matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
    let mut rng: Rng = seeded(seed);
    DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn vector(n: usize, seed: u64) -> Vec<f64> {
    matrix(n, 1, seed).into_vec()
}
