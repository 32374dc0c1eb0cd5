use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fem::{DensityField, Model};
use crate::simp::MaterialInterp;
use crate::sparse::{dot, factor_spd, Factorization, SparseSymMatrix};

const MAX_STEPS: usize = 500;

/// First natural frequency (Hz) of `K·φ = λ·M·φ` by inverse iteration,
/// factoring `K` once.
pub fn first_natural_frequency(k: &SparseSymMatrix, m: &SparseSymMatrix) -> Result<f64> {
    let fact = factor_spd(k)?;
    first_natural_frequency_with(&fact, k, m)
}

/// As [`first_natural_frequency`] with an existing factor of `K`.
pub fn first_natural_frequency_with(fact: &Factorization, k: &SparseSymMatrix, m: &SparseSymMatrix) -> Result<f64> {
    let h = k.dim();
    if m.dim() != h || fact.dim() != h {
        return Err(Error::DimensionMismatch {
            expected: h,
            actual: m.dim(),
        });
    }
    // fixed, non-symmetric start so no mode is missed by symmetry
    let mut x: Vec<f64> = (0..h).map(|i| 1.0 + ((i * 7919) % 101) as f64 / 101.0).collect();
    let mut lambda = f64::INFINITY;
    for _ in 0..MAX_STEPS {
        let mx = m.matvec(&x)?;
        let y = fact.solve(&mx)?;
        let ky = k.matvec(&y)?;
        let my = m.matvec(&y)?;
        let num = dot(&y, &ky);
        let den = dot(&y, &my);
        if !(den > 0.0) {
            return Err(Error::InvalidParameter(
                "mass matrix is not positive on the iterate".into(),
            ));
        }
        let next = num / den;
        let scale = den.sqrt();
        x = y.into_iter().map(|v| v / scale).collect();
        if (next - lambda).abs() <= 1e-10 * next {
            return Ok(next.sqrt() / (2.0 * PI));
        }
        lambda = next;
    }
    Err(Error::EigenNotConverged(MAX_STEPS))
}

/// Mass scaling used for frequency evaluation: `V` above 0.1 and `10⁵·V⁶`
/// below, which keeps near-void regions from producing spurious local modes.
pub fn frequency_mass_scale(v: f64) -> f64 {
    if v > 0.1 {
        v
    } else {
        1e5 * v.powi(6)
    }
}

/// First natural frequency of a design with near-void mass suppressed.
pub fn design_frequency(model: &Model, density: &DensityField, interp: &MaterialInterp) -> Result<f64> {
    let k = model.assemble_k(density, interp)?;
    let scales: Vec<f64> = model
        .volume_fractions(density, interp)
        .into_iter()
        .map(frequency_mass_scale)
        .collect();
    let m = model.mass_from_scales(&scales)?;
    let fact = model.factor(&k)?;
    first_natural_frequency_with(&fact, &k, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn dense(a: DMatrix<f64>) -> SparseSymMatrix {
        SparseSymMatrix::from_dense(&a).unwrap()
    }

    #[test]
    fn single_dof_is_one_hertz() {
        let k = dense(DMatrix::from_element(1, 1, 4.0 * PI * PI));
        let m = dense(DMatrix::from_element(1, 1, 1.0));
        assert!((first_natural_frequency(&k, &m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaling_stiffness_by_four_doubles() {
        let k = dense(DMatrix::from_row_slice(
            3,
            3,
            &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0],
        ));
        let m = dense(DMatrix::identity(3, 3));
        let f1 = first_natural_frequency(&k, &m).unwrap();
        let k4 = dense(DMatrix::from_row_slice(
            3,
            3,
            &[8.0, -4.0, 0.0, -4.0, 8.0, -4.0, 0.0, -4.0, 8.0],
        ));
        let f4 = first_natural_frequency(&k4, &m).unwrap();
        assert!((f4 / f1 - 2.0).abs() < 1e-10);
        // smallest eigenvalue of the chain is 2 − √2
        assert!((f1 - (2.0 - 2f64.sqrt()).sqrt() / (2.0 * PI)).abs() < 1e-10);
    }

    #[test]
    fn mass_scale_is_continuous() {
        assert!((frequency_mass_scale(0.1) - 0.1).abs() < 1e-15);
        assert_eq!(frequency_mass_scale(0.5), 0.5);
        assert!(frequency_mass_scale(0.01) < 1e-6);
    }
}
