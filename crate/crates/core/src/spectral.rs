//! Frequency-domain views of graph filters on symmetric shift operators.
//!
//! With `S = V Λ Vᵀ`, a filter that is a function of `S` acts on the graph
//! Fourier coefficients `Vᵀ x` pointwise through its response `a(λ)`.
//! Directed shifts are refused: their eigenvectors are not orthogonal.

use num_complex::Complex64;

use crate::error::{dims, Error, Result};
use crate::filters::ArmaRational;
use crate::graph::{CsrMatrix, Pattern, SupportMask};
use crate::linalg::{
    null_space_basis, poly_eval, poly_roots, sym_eig, DenseMatrix, EigenDecomposition,
};

/// Symmetry tolerance applied before any eigendecomposition.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Entries of a reconstructed `Φ` smaller than this are dropped.
pub const RECONSTRUCTION_DROP: f64 = 1e-9;
/// Off-support magnitude above which reconstruction fails.
pub const SUPPORT_LEAK_TOL: f64 = 1e-6;
/// Minimum distance between an eigenvalue and a denominator root.
pub const POLE_DISTANCE_TOL: f64 = 1e-10;

/// Eigendecomposition of a symmetric sparse shift.
pub fn shift_eigen(s: &CsrMatrix) -> Result<EigenDecomposition> {
    let asym = s.max_asymmetry();
    if !s.is_square() || asym > SYMMETRY_TOL * s.to_dense().max_abs().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    sym_eig(&s.to_dense())
}

/// `x̃ = Vᵀ x`.
pub fn gft(v: &DenseMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    if v.rows() != x.rows() {
        return Err(dims(format!(
            "GFT of {} rows with {} eigenvectors",
            x.rows(),
            v.rows()
        )));
    }
    v.transpose().matmul(x)
}

/// `x = V x̃`.
pub fn igft(v: &DenseMatrix, xt: &DenseMatrix) -> Result<DenseMatrix> {
    if v.cols() != xt.rows() {
        return Err(dims(format!(
            "inverse GFT of {} coefficients with {} eigenvectors",
            xt.rows(),
            v.cols()
        )));
    }
    v.matmul(xt)
}

/// `V diag(response) Vᵀ x`.
pub fn apply_response(
    eig: &EigenDecomposition,
    response: &[f64],
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    if response.len() != eig.eigenvalues.len() {
        return Err(dims(
            "response length differs from the number of eigenvalues",
        ));
    }
    let mut xt = gft(&eig.eigenvectors, x)?;
    for (n, &h) in response.iter().enumerate() {
        xt.row_mut(n).iter_mut().for_each(|v| *v *= h);
    }
    igft(&eig.eigenvectors, &xt)
}

pub fn poly_response(coeffs: &[f64], lambdas: &[f64]) -> Vec<f64> {
    lambdas
        .iter()
        .map(|&l| coeffs.iter().rev().fold(0.0, |acc, &c| acc * l + c))
        .collect()
}

/// `(Σ b_q λ^q) / (1 + Σ a_p λ^p)` per eigenvalue.
pub fn arma_response(f: &ArmaRational, lambdas: &[f64]) -> Result<Vec<f64>> {
    let mut den = f.denominator();
    while den.len() > 1 && *den.last().unwrap() == 0.0 {
        den.pop();
    }
    let roots = if den.len() > 1 {
        poly_roots(&den)?
    } else {
        Vec::new()
    };
    lambdas
        .iter()
        .map(|&l| {
            let z = Complex64::new(l, 0.0);
            if roots.iter().any(|r| (r - z).norm() <= POLE_DISTANCE_TOL) {
                return Err(Error::PoleAtEigenvalue { lambda: l });
            }
            let d = poly_eval(&den, z).re;
            if d == 0.0 {
                return Err(Error::PoleAtEigenvalue { lambda: l });
            }
            Ok(poly_eval(&f.b, z).re / d)
        })
        .collect()
}

/// Orthonormal basis `B` (`N x b`) of spectral responses `λ` whose vertex
/// filter `V diag(λ) Vᵀ` vanishes off `supp(I + S)`.
#[derive(Debug, Clone)]
pub struct SpectralBasisKernel {
    basis: DenseMatrix,
    eigen: EigenDecomposition,
    support: Pattern,
    tol: f64,
}

impl SpectralBasisKernel {
    pub fn basis(&self) -> &DenseMatrix {
        &self.basis
    }

    /// `b`, the dimension of the admissible response space.
    pub fn nullity(&self) -> usize {
        self.basis.cols()
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eigen
    }

    pub fn support(&self) -> &Pattern {
        &self.support
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `B μ`.
    pub fn response(&self, mu: &[f64]) -> Result<Vec<f64>> {
        if mu.len() != self.nullity() {
            return Err(dims(format!(
                "mu has length {} for nullity {}",
                mu.len(),
                self.nullity()
            )));
        }
        self.basis.matvec(mu)
    }
}

/// Constraint matrix whose rows are the zero positions `(i, j)` of `I + S`
/// (upper triangle only, the lower one repeats it) and whose entry at
/// column `n` is `V_in V_jn`, i.e. row `i N + j` of `khatri_rao(V, V)`.
/// With this convention `[C_J (V ⊙ V)] λ = C_J vec(V diag(λ) Vᵀ)` holds
/// for row-major `vec`, using `V^{-1} = Vᵀ`.
fn support_constraints(v: &DenseMatrix, support: &Pattern) -> DenseMatrix {
    let n = v.rows();
    let mut rows = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !support.contains(i, j) {
                rows.push((0..n).map(|m| v[(i, m)] * v[(j, m)]).collect::<Vec<_>>());
            }
        }
    }
    if rows.is_empty() {
        DenseMatrix::zeros(0, n)
    } else {
        DenseMatrix::from_rows(&rows)
    }
}

pub fn build_basis_kernel(s: &CsrMatrix, tol: f64) -> Result<SpectralBasisKernel> {
    let eigen = shift_eigen(s)?;
    let support = SupportMask::from_shift(s).into_pattern();
    let constraints = support_constraints(&eigen.eigenvectors, &support);
    let basis = null_space_basis(&constraints, tol);
    Ok(SpectralBasisKernel {
        basis,
        eigen,
        support,
        tol,
    })
}

/// Vertex-domain filter rebuilt from a spectral response.
#[derive(Debug, Clone)]
pub struct PhiReconstruction {
    pub phi: CsrMatrix,
    /// Largest magnitude dropped, on or off the support.
    pub residual: f64,
}

/// `V diag(Bμ) Vᵀ` restricted to `supp(I + S)`.
pub fn reconstruct_phi(kernel: &SpectralBasisKernel, mu: &[f64]) -> Result<PhiReconstruction> {
    let lambda = kernel.response(mu)?;
    let dense = kernel.eigen.reconstruct_with(&lambda);
    let n = dense.rows();
    let mut leak: f64 = 0.0;
    let mut residual: f64 = 0.0;
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = dense[(i, j)];
            if !kernel.support.contains(i, j) {
                leak = leak.max(v.abs());
                residual = residual.max(v.abs());
            } else if v.abs() < RECONSTRUCTION_DROP {
                residual = residual.max(v.abs());
            } else {
                triplets.push((i, j, v));
            }
        }
    }
    if leak > SUPPORT_LEAK_TOL {
        return Err(Error::SupportLeak { magnitude: leak });
    }
    Ok(PhiReconstruction {
        phi: CsrMatrix::from_triplets(n, n, triplets)?,
        residual,
    })
}

/// Spectral edge-varying filter with response `Σ_{k=1}^K Π_{k'≤k} (B μ^(k'))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEdgeVaryingFilter {
    pub mus: Vec<Vec<f64>>,
}

impl SpectralEdgeVaryingFilter {
    pub fn new(mus: Vec<Vec<f64>>) -> Self {
        Self { mus }
    }

    pub fn order(&self) -> usize {
        self.mus.len()
    }

    pub fn response(&self, kernel: &SpectralBasisKernel) -> Result<Vec<f64>> {
        let n = kernel.basis.rows();
        let mut out = vec![0.0; n];
        let mut running = vec![1.0; n];
        for mu in &self.mus {
            let lam = kernel.response(mu)?;
            for ((r, l), o) in running.iter_mut().zip(&lam).zip(out.iter_mut()) {
                *r *= l;
                *o += *r;
            }
        }
        Ok(out)
    }

    /// Reconstructed `Φ̌^(k)` matrices, one per order.
    pub fn vertex_matrices(&self, kernel: &SpectralBasisKernel) -> Result<Vec<CsrMatrix>> {
        self.mus
            .iter()
            .map(|mu| reconstruct_phi(kernel, mu).map(|r| r.phi))
            .collect()
    }

    /// `Σ_k Φ̌^(k) ⋯ Φ̌^(1) X` computed in the vertex domain.
    pub fn vertex_apply(
        &self,
        kernel: &SpectralBasisKernel,
        x: &DenseMatrix,
    ) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        let mut z = x.clone();
        for phi in self.vertex_matrices(kernel)? {
            z = phi.spmm(&z)?;
            out.add_assign(&z);
        }
        Ok(out)
    }
}

/// `spectral_ev_response` as a free function.
pub fn spectral_ev_response(
    f: &SpectralEdgeVaryingFilter,
    kernel: &SpectralBasisKernel,
) -> Result<Vec<f64>> {
    f.response(kernel)
}
