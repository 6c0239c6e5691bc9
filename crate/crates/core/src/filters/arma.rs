use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_signal, PolynomialFilter};
use crate::error::{dims, Error, Result};
use crate::graph::CsrMatrix;
use crate::linalg::{poly_eval, poly_roots, sym_eig, DenseMatrix, LuFactors};

/// Minimum admissible `|D_ii - γ|`.
pub const SINGULARITY_EPS: f64 = 1e-9;
/// Largest graph accepted by the dense exact ARMA path.
pub const ARMA_EXACT_MAX_NODES: usize = 500;
/// Two poles closer than this are treated as repeated.
const POLE_SEPARATION: f64 = 1e-8;
/// Root finders resolve a root of multiplicity `m` only to about `eps^(1/m)`,
/// so computed poles within this relative distance are also treated as one
/// repeated pole.
const POLE_CLUSTER: f64 = 1e-5;

/// `R(γ) = -(D - γI)^{-1} (S - D)` with `D = diag(S)`; the pattern is the
/// off-diagonal pattern of `S`.
pub fn jacobi_shift(s: &CsrMatrix, gamma: f64) -> Result<CsrMatrix> {
    if !s.is_square() {
        return Err(dims("shift operator must be square"));
    }
    let diag = s.diagonal();
    let inv = inverse_gaps(&diag, gamma)?;
    let values = s
        .triplets()
        .filter(|&(i, j, _)| i != j)
        .map(|(i, _, v)| -v * inv[i])
        .collect();
    CsrMatrix::new(s.pattern().filter(|i, j| i != j), values)
}

/// `1 / (D_ii - γ)` per node, refusing gaps at or below [`SINGULARITY_EPS`].
pub(crate) fn inverse_gaps(diag: &[f64], gamma: f64) -> Result<Vec<f64>> {
    diag.iter()
        .enumerate()
        .map(|(node, &d)| {
            let gap = d - gamma;
            if gap.abs() <= SINGULARITY_EPS {
                Err(Error::SingularDiagonal { node, gap })
            } else {
                Ok(1.0 / gap)
            }
        })
        .collect()
}

/// `u_K = β Σ_{k<K} R^k x + R^K x` for a single vector.
pub fn apply_single_pole_jacobi(
    s: &CsrMatrix,
    beta: f64,
    gamma: f64,
    jacobi_order: usize,
    x: &[f64],
) -> Result<Vec<f64>> {
    let xm = DenseMatrix::column_vector(x);
    Ok(single_pole_jacobi_matrix(s, beta, gamma, jacobi_order, &xm)?.into_vec())
}

/// Column-wise [`apply_single_pole_jacobi`] on an `N x F` signal.
pub fn single_pole_jacobi_matrix(
    s: &CsrMatrix,
    beta: f64,
    gamma: f64,
    jacobi_order: usize,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    check_signal(s, x)?;
    let r = jacobi_shift(s, gamma)?;
    single_pole_with_shift(&r, beta, jacobi_order, x)
}

fn single_pole_with_shift(
    r: &CsrMatrix,
    beta: f64,
    jacobi_order: usize,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(x.rows(), x.cols());
    let mut power = x.clone();
    for _ in 0..jacobi_order {
        out.axpy(beta, &power);
        power = r.spmm(&power)?;
    }
    out.add_assign(&power);
    Ok(out)
}

/// Jacobi ARMA filter: `Σ_p H_K(R(γ_p)) + Σ_k α_k S^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaJacobiFilter {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub jacobi_order: usize,
}

impl ArmaJacobiFilter {
    pub fn new(
        betas: Vec<f64>,
        gammas: Vec<f64>,
        alphas: Vec<f64>,
        jacobi_order: usize,
    ) -> Result<Self> {
        if betas.len() != gammas.len() {
            return Err(dims(format!(
                "{} residues for {} poles",
                betas.len(),
                gammas.len()
            )));
        }
        if alphas.is_empty() {
            return Err(Error::InvalidArgument(
                "direct term needs at least alpha_0".into(),
            ));
        }
        Ok(Self {
            betas,
            gammas,
            alphas,
            jacobi_order,
        })
    }

    pub fn poles(&self) -> usize {
        self.gammas.len()
    }

    /// Order of the direct term `Σ α_k S^k`.
    pub fn direct_order(&self) -> usize {
        self.alphas.len() - 1
    }

    /// `2P + K + 1` with `K` the direct-term order.
    pub fn param_count(&self) -> usize {
        2 * self.poles() + self.alphas.len()
    }

    /// Checks the singularity guard against `s` for every pole.
    pub fn check_admissible(&self, s: &CsrMatrix) -> Result<()> {
        let diag = s.diagonal();
        for &g in &self.gammas {
            inverse_gaps(&diag, g)?;
        }
        Ok(())
    }

    pub fn apply(&self, s: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
        check_signal(s, x)?;
        let direct = PolynomialFilter::new(self.alphas.clone())?;
        let mut out = direct.apply(s, x)?;
        for (&b, &g) in self.betas.iter().zip(&self.gammas) {
            let r = jacobi_shift(s, g)?;
            out.add_assign(&single_pole_with_shift(&r, b, self.jacobi_order, x)?);
        }
        Ok(out)
    }
}

pub fn apply_arma_jacobi(
    f: &ArmaJacobiFilter,
    s: &CsrMatrix,
    x: &DenseMatrix,
) -> Result<DenseMatrix> {
    f.apply(s, x)
}

/// Rational filter `P^{-1}(S) Q(S)` with `P(λ) = 1 + Σ_p a_p λ^p` and
/// `Q(λ) = Σ_q b_q λ^q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaRational {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl ArmaRational {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Self {
        Self { a, b }
    }

    /// Denominator coefficients in ascending order, constant term first.
    pub fn denominator(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(self.a.len() + 1);
        d.push(1.0);
        d.extend_from_slice(&self.a);
        d
    }

    pub fn numerator(&self) -> &[f64] {
        &self.b
    }

    /// `Q(λ)/P(λ)` at a complex point.
    pub fn evaluate(&self, lambda: Complex64) -> Complex64 {
        poly_eval(&self.b, lambda) / poly_eval(&self.denominator(), lambda)
    }
}

/// Dense LU solve of `P(S) U = Q(S) X`; refuses graphs above
/// [`ARMA_EXACT_MAX_NODES`] and verifies the solve residual.
pub fn apply_arma_exact(f: &ArmaRational, s: &CsrMatrix, x: &DenseMatrix) -> Result<DenseMatrix> {
    check_signal(s, x)?;
    let n = s.n_rows();
    if n > ARMA_EXACT_MAX_NODES {
        return Err(Error::TooLarge {
            n,
            max: ARMA_EXACT_MAX_NODES,
        });
    }
    let rhs = if f.b.is_empty() {
        DenseMatrix::zeros(n, x.cols())
    } else {
        PolynomialFilter::new(f.b.clone())?.apply(s, x)?
    };
    if f.a.is_empty() {
        return Ok(rhs);
    }
    let sd = s.to_dense();
    let mut p = DenseMatrix::identity(n);
    let mut power = DenseMatrix::identity(n);
    for &a in &f.a {
        power = power.matmul(&sd)?;
        p.axpy(a, &power);
    }
    let u = LuFactors::new(&p)?.solve(&rhs)?;
    let residual = p.matmul(&u)?.max_abs_diff(&rhs);
    let scale = p.max_abs() * u.max_abs() + rhs.max_abs();
    if !u.is_finite() || residual > 1e-10 * scale.max(1.0) {
        return Err(Error::SingularSystem);
    }
    Ok(u)
}

/// Direct terms, simple poles and residues of a rational response:
/// `Q(λ)/P(λ) = Σ_k α_k λ^k + Σ_p β_p / (λ - γ_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractions {
    pub alphas: Vec<f64>,
    pub poles: Vec<Complex64>,
    pub residues: Vec<Complex64>,
}

impl PartialFractions {
    pub fn evaluate(&self, lambda: Complex64) -> Complex64 {
        let direct = poly_eval(&self.alphas, lambda);
        self.poles
            .iter()
            .zip(&self.residues)
            .fold(direct, |acc, (&g, &b)| acc + b / (lambda - g))
    }
}

pub fn partial_fraction_decompose(f: &ArmaRational) -> Result<PartialFractions> {
    let mut den = f.denominator();
    while den.len() > 1 && *den.last().unwrap() == 0.0 {
        den.pop();
    }
    let mut num = f.b.clone();
    while num.last() == Some(&0.0) {
        num.pop();
    }
    if den.len() == 1 {
        return Ok(PartialFractions {
            alphas: num.iter().map(|b| b / den[0]).collect(),
            poles: Vec::new(),
            residues: Vec::new(),
        });
    }
    let (quotient, remainder) = poly_divide(&num, &den);
    let poles = poly_roots(&den)?;
    for (i, a) in poles.iter().enumerate() {
        for b in &poles[i + 1..] {
            let separation = (a - b).norm();
            let cluster = POLE_CLUSTER * (1.0 + a.norm().max(b.norm()));
            if separation <= POLE_SEPARATION.max(cluster) {
                return Err(Error::RepeatedPoles { separation });
            }
        }
    }
    let derivative: Vec<f64> = den
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect();
    let residues = poles
        .iter()
        .map(|&g| poly_eval(&remainder, g) / poly_eval(&derivative, g))
        .collect();
    Ok(PartialFractions {
        alphas: quotient,
        poles,
        residues,
    })
}

/// Long division of ascending-order polynomials; returns `(quotient, remainder)`.
fn poly_divide(num: &[f64], den: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let dd = den.len() - 1;
    let lead = den[dd];
    let mut rem = num.to_vec();
    if rem.len() <= dd {
        return (Vec::new(), rem);
    }
    let mut quotient = vec![0.0; rem.len() - dd];
    for shift in (0..quotient.len()).rev() {
        let c = rem[shift + dd] / lead;
        quotient[shift] = c;
        for (k, &d) in den.iter().enumerate() {
            rem[shift + k] -= c * d;
        }
    }
    rem.truncate(dd);
    (quotient, rem)
}

/// Materialized edge-varying form of a Jacobi ARMA filter.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmaEdgeVaryingTerms {
    /// `pole_terms[p][k]` is `Φ_p^(k:0)`: `β_p R^k(γ_p)` for `k < K`, `R^K(γ_p)` at `k = K`.
    pub pole_terms: Vec<Vec<CsrMatrix>>,
    /// `direct_terms[k]` is `α_k S^k`.
    pub direct_terms: Vec<CsrMatrix>,
}

impl ArmaEdgeVaryingTerms {
    pub fn apply(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for m in self.pole_terms.iter().flatten().chain(&self.direct_terms) {
            out.add_assign(&m.spmm(x)?);
        }
        Ok(out)
    }

    pub fn matrices(&self) -> impl Iterator<Item = &CsrMatrix> {
        self.pole_terms.iter().flatten().chain(&self.direct_terms)
    }
}

pub fn arma_to_edge_varying(f: &ArmaJacobiFilter, s: &CsrMatrix) -> Result<ArmaEdgeVaryingTerms> {
    if !s.is_square() {
        return Err(dims("shift operator must be square"));
    }
    let n = s.n_rows();
    let k = f.jacobi_order;
    let mut pole_terms = Vec::with_capacity(f.poles());
    for (&b, &g) in f.betas.iter().zip(&f.gammas) {
        let r = jacobi_shift(s, g)?;
        let mut power = CsrMatrix::identity(n);
        let mut terms = Vec::with_capacity(k + 1);
        for step in 0..=k {
            if step > 0 {
                power = r.matmul(&power)?;
            }
            terms.push(if step < k {
                power.scale(b)
            } else {
                power.clone()
            });
        }
        pole_terms.push(terms);
    }
    let mut direct_terms = Vec::with_capacity(f.alphas.len());
    let mut power = CsrMatrix::identity(n);
    for (step, &a) in f.alphas.iter().enumerate() {
        if step > 0 {
            power = s.matmul(&power)?;
        }
        direct_terms.push(power.scale(a));
    }
    Ok(ArmaEdgeVaryingTerms {
        pole_terms,
        direct_terms,
    })
}

/// Spectral radius of `R(γ)`. Uses a symmetric similarity transform when
/// `S` is symmetric and every gap `D_ii - γ` has the same sign, otherwise
/// estimates `‖R^m‖^{1/m}` for `m = 2^20` by repeated squaring (dense, `O(N^3)` per squaring).
pub fn jacobi_spectral_radius(s: &CsrMatrix, gamma: f64) -> Result<f64> {
    let diag = s.diagonal();
    let inv = inverse_gaps(&diag, gamma)?;
    let n = s.n_rows();
    let same_sign = inv.iter().all(|&v| v > 0.0) || inv.iter().all(|&v| v < 0.0);
    if same_sign && s.is_symmetric(1e-12) {
        let sign = inv[0].signum();
        let root: Vec<f64> = inv.iter().map(|v| v.abs().sqrt()).collect();
        let mut m = DenseMatrix::zeros(n, n);
        for (i, j, v) in s.triplets() {
            if i != j {
                m.as_mut_slice()[i * n + j] = -sign * root[i] * v * root[j];
            }
        }
        let eig = sym_eig(&m)?;
        return Ok(eig.eigenvalues.iter().fold(0.0, |a, l| a.max(l.abs())));
    }
    let mut m = jacobi_shift(s, gamma)?.to_dense();
    let mut log_scale = 0.0;
    let mut exponent = 1.0;
    for _ in 0..20 {
        let norm = m.max_abs();
        if norm == 0.0 {
            return Ok(0.0);
        }
        m = m.scale(1.0 / norm);
        log_scale += norm.ln() / exponent;
        m = m.matmul(&m)?;
        exponent *= 2.0;
    }
    let norm = m.frobenius_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    Ok((log_scale + norm.ln() / exponent).exp())
}
