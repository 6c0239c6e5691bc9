use num_complex::Complex64;

use crate::error::{Error, Result};

pub const POLY_ROOTS_MAX_ITER: usize = 1000;

/// Evaluates `Σ c_k z^k` (coefficients in ascending order) by Horner's rule.
pub fn poly_eval(coeffs: &[f64], z: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// All complex roots of `Σ c_k λ^k` by Durand–Kerner iteration.
///
/// Coefficients are in ascending order and the last one must be nonzero.
/// Starting points are the powers `(0.4 + 0.9i)^k`. Iteration stops when the
/// largest update is below `1e-12` (relative to the root magnitude, floor 1)
/// or when every root has a residual at rounding level, which is as far as
/// clustered roots can be resolved.
pub fn poly_roots(coeffs: &[f64]) -> Result<Vec<Complex64>> {
    let degree = coeffs.len().saturating_sub(1);
    if degree == 0 {
        return Err(Error::DegreeZero);
    }
    let lead = coeffs[degree];
    if lead == 0.0 {
        return Err(Error::InvalidArgument(
            "leading coefficient must be nonzero".into(),
        ));
    }
    let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
    let abs_coeffs: Vec<f64> = monic.iter().map(|c| c.abs()).collect();

    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..degree).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..POLY_ROOTS_MAX_ITER {
        let mut max_update: f64 = 0.0;
        for i in 0..degree {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, &zj) in roots.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            let delta = poly_eval(&monic, zi) / denom;
            if delta.is_finite() {
                roots[i] = zi - delta;
                max_update = max_update.max(delta.norm() / zi.norm().max(1.0));
            }
        }
        if max_update < 1e-12 || at_rounding_level(&monic, &abs_coeffs, &roots) {
            return Ok(roots);
        }
    }
    Err(Error::NoConvergence {
        what: "Durand-Kerner root finding",
        iterations: POLY_ROOTS_MAX_ITER,
    })
}

fn at_rounding_level(monic: &[f64], abs_coeffs: &[f64], roots: &[Complex64]) -> bool {
    roots.iter().all(|&z| {
        let r = z.norm();
        let bound = abs_coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c);
        poly_eval(monic, z).norm() <= 8.0 * f64::EPSILON * bound
    })
}
