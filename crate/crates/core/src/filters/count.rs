use serde::{Deserialize, Serialize};

/// Filter family and the structural sizes its parameter count depends on.
///
/// `order` is `K`. Graph-dependent kinds carry the counts they need:
/// `edges` is `M` (stored off-diagonal nonzeros of `S`), `nodes` is `N`,
/// `important` is `|I|` and `important_edges` is `M_I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterKind {
    Polynomial {
        order: usize,
    },
    EdgeVarying {
        order: usize,
        edges: usize,
        nodes: usize,
    },
    BlockVarying {
        blocks: usize,
        order: usize,
    },
    Hybrid {
        important: usize,
        important_edges: usize,
        order: usize,
    },
    Arma {
        poles: usize,
        order: usize,
    },
    Gat {
        tied: bool,
    },
    Gcat {
        order: usize,
        tied: bool,
    },
    EdgeVaryingGat {
        order: usize,
        tied: bool,
    },
    HybridGcat {
        order: usize,
        tied: bool,
    },
}

/// Trainable scalars of one layer mapping `f_in` to `f_out` features.
///
/// Linear filter layers are banks of `f_in * f_out` scalar filters. Attention
/// layers add per-head transforms `B` (`f_in x f_out`) and score vectors
/// (`2 f_out`); tying replaces each `B` by the matching mixing matrix.
pub fn param_count(kind: FilterKind, f_in: usize, f_out: usize) -> usize {
    let f2 = f_in * f_out;
    let head = f2 + 2 * f_out;
    match kind {
        FilterKind::Polynomial { order } => (order + 1) * f2,
        FilterKind::EdgeVarying {
            order,
            edges,
            nodes,
        } => (order * (edges + nodes) + nodes) * f2,
        FilterKind::BlockVarying { blocks, order } => blocks * (order + 1) * f2,
        FilterKind::Hybrid {
            important,
            important_edges,
            order,
        } => (important + order * important_edges + order + 1) * f2,
        FilterKind::Arma { poles, order } => (2 * poles + order + 1) * f2,
        FilterKind::Gat { tied } => head + f2 - if tied { f2 } else { 0 },
        FilterKind::Gcat { order, tied } => head + (order + 1) * f2 - if tied { f2 } else { 0 },
        FilterKind::EdgeVaryingGat { order, tied } => {
            (order + 1) * (head + f2) - if tied { (order + 1) * f2 } else { 0 }
        }
        FilterKind::HybridGcat { order, tied } => {
            (order + 1) * (head + 2 * f2) - if tied { (order + 1) * f2 } else { 0 }
        }
    }
}
