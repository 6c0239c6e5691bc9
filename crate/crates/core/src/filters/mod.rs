//! Linear graph filters.
//!
//! Every filter here is a sum of terms `Φ^(k:0) X`: polynomial filters use
//! `a_k S^k`, edge-varying filters accumulate a running product of
//! support-restricted parameter matrices, block-varying filters scale rows of
//! `S^k X` per node block, hybrid filters add an edge-varying part on an
//! important node set, and ARMA filters add single-pole branches unrolled as
//! truncated Jacobi iterations in the shift `R(γ)`.

mod arma;
mod block;
mod count;
mod edge_varying;
mod hybrid;
mod polynomial;

pub use arma::{
    apply_arma_exact, apply_arma_jacobi, apply_single_pole_jacobi, arma_to_edge_varying,
    jacobi_shift, jacobi_spectral_radius, partial_fraction_decompose, single_pole_jacobi_matrix,
    ArmaEdgeVaryingTerms, ArmaJacobiFilter, ArmaRational, PartialFractions, ARMA_EXACT_MAX_NODES,
    SINGULARITY_EPS,
};
pub use block::BlockVaryingFilter;
pub use count::{param_count, FilterKind};
pub use edge_varying::EdgeVaryingFilter;
pub use hybrid::HybridFilter;
pub use polynomial::PolynomialFilter;

use crate::error::{dims, Result};
use crate::graph::CsrMatrix;
use crate::linalg::DenseMatrix;

pub(crate) fn check_signal(s: &CsrMatrix, x: &DenseMatrix) -> Result<()> {
    if !s.is_square() {
        return Err(dims("shift operator must be square"));
    }
    if x.rows() != s.n_rows() {
        return Err(dims(format!(
            "signal has {} rows for a graph of {} nodes",
            x.rows(),
            s.n_rows()
        )));
    }
    Ok(())
}
