//! Graphs, shift operators, and the sparse kernels every filter is built on.

mod centrality;
mod edge_list;
mod perm;
mod sbm;
mod sparse;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use centrality::{diffusion_centrality, select_nodes, NodeSelection};
pub use edge_list::{parse_edge_list, read_edge_list, write_edge_list};
pub use perm::{permute_rows, permute_shift, permute_signal, Permutation};
pub use sbm::{sbm_generate, SBM_MAX_RETRIES};
pub use sparse::{CsrMatrix, Pattern, SupportMask};

/// A weighted edge `src -> dst`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
}

/// Node count plus an edge list. Undirected graphs store each edge once and
/// expand it symmetrically when the adjacency is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    directed: bool,
}

impl Graph {
    pub fn new(n: usize, directed: bool) -> Self {
        Self {
            n,
            edges: Vec::new(),
            directed,
        }
    }

    pub fn from_edges(
        n: usize,
        directed: bool,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut g = Self::new(n, directed);
        for (s, d, w) in edges {
            g.add_edge(s, d, w)?;
        }
        Ok(g)
    }

    /// Adds an edge; self-loops and out-of-range endpoints are rejected.
    pub fn add_edge(&mut self, src: usize, dst: usize, weight: f64) -> Result<()> {
        if src >= self.n || dst >= self.n {
            return Err(Error::InvalidArgument(format!(
                "edge ({src}, {dst}) outside a graph of {} nodes",
                self.n
            )));
        }
        if src == dst {
            return Err(Error::InvalidArgument(format!("self-loop at node {src}")));
        }
        self.edges.push(Edge { src, dst, weight });
        Ok(())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    #[inline]
    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Adjacency matrix. Undirected edges are written in both directions; a
    /// repeated edge keeps the weight listed last.
    pub fn adjacency(&self) -> CsrMatrix {
        let mut entries = BTreeMap::new();
        for e in &self.edges {
            entries.insert((e.src, e.dst), e.weight);
            if !self.directed {
                entries.insert((e.dst, e.src), e.weight);
            }
        }
        CsrMatrix::from_triplets(
            self.n,
            self.n,
            entries
                .into_iter()
                .map(|((i, j), w)| (i, j, w))
                .collect::<Vec<_>>(),
        )
        .expect("edges were validated on insertion")
    }

    /// Neighbor lists ignoring direction.
    fn undirected_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.n];
        for e in &self.edges {
            nb[e.src].push(e.dst);
            nb[e.dst].push(e.src);
        }
        nb
    }
}

/// Breadth-first search from node 0 over the undirected view of the graph.
pub fn is_connected(graph: &Graph) -> bool {
    if graph.n() <= 1 {
        return true;
    }
    let nb = graph.undirected_neighbors();
    let mut seen = vec![false; graph.n()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut reached = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &nb[u] {
            if !seen[v] {
                seen[v] = true;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    reached == graph.n()
}

/// How the adjacency is scaled into a shift operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    #[default]
    MaxEigenvalue,
    RowStochastic,
}

pub const POWER_ITERATION_TOL: f64 = 1e-10;
pub const POWER_ITERATION_MAX_ITER: usize = 10_000;

/// Builds the shift operator of `graph` under the requested normalization.
pub fn build_shift(graph: &Graph, normalization: Normalization) -> Result<CsrMatrix> {
    if graph.n() == 0 {
        return Err(Error::InvalidArgument("graph has no nodes".into()));
    }
    let adj = graph.adjacency();
    normalize_shift(adj, normalization)
}

/// Applies a normalization to an existing square matrix.
pub fn normalize_shift(adj: CsrMatrix, normalization: Normalization) -> Result<CsrMatrix> {
    match normalization {
        Normalization::None => Ok(adj),
        Normalization::MaxEigenvalue => {
            if adj.nnz() == 0 {
                return Err(Error::InvalidArgument(
                    "max-eigenvalue normalization of a graph without edges".into(),
                ));
            }
            let lambda =
                power_iteration_lambda_max(&adj, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITER)?;
            if lambda == 0.0 {
                return Err(Error::Numerical("dominant eigenvalue is zero".into()));
            }
            Ok(adj.scale(1.0 / lambda))
        }
        Normalization::RowStochastic => {
            let mut out = adj;
            let row_ptr = out.row_ptr().to_vec();
            let values = out.values_mut();
            for i in 0..row_ptr.len() - 1 {
                let row = &mut values[row_ptr[i]..row_ptr[i + 1]];
                let sum: f64 = row.iter().sum();
                if sum != 0.0 {
                    row.iter_mut().for_each(|v| *v /= sum);
                }
            }
            Ok(out)
        }
    }
}

/// Magnitude of the dominant eigenvalue of a square matrix.
///
/// Tracks `‖S v‖` for unit `v`, the square root of the Rayleigh quotient of
/// `SᵀS`. On symmetric input this converges to `max |λ|` even when `λ` and
/// `-λ` are both eigenvalues (bipartite graphs), where the plain Rayleigh
/// quotient of `S` stalls. The start vector is the normalized ones vector with
/// its first entry doubled.
pub fn power_iteration_lambda_max(s: &CsrMatrix, tol: f64, max_iter: usize) -> Result<f64> {
    if !s.is_square() {
        return Err(crate::error::dims("power iteration needs a square matrix"));
    }
    if tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = s.n_rows();
    if n == 0 {
        return Ok(0.0);
    }
    let mut v = vec![1.0; n];
    v[0] = 2.0;
    normalize(&mut v);
    let mut prev = f64::NAN;
    for _ in 0..max_iter {
        let mut w = s.spmv(&v)?;
        let mu = norm(&w);
        if mu == 0.0 {
            return Ok(0.0);
        }
        if (mu - prev).abs() < tol {
            return Ok(mu);
        }
        prev = mu;
        w.iter_mut().for_each(|x| *x /= mu);
        v = w;
    }
    Err(Error::NoConvergence {
        what: "power iteration",
        iterations: max_iter,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}
