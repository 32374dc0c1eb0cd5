use super::MaterialInterp;
use crate::error::{Error, Result};
use crate::fem::{DensityField, Model};
use crate::pod::EslSet;

/// Multi-load compliance with its design sensitivities.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    /// `z = Σ_u d_uᵀK·d_u`.
    pub z: f64,
    pub per_load: Vec<f64>,
    /// `dz/db_e` (non-positive).
    pub dz: Vec<f64>,
    /// `dV/db_e = vol_e·V_e'(b_e)`.
    pub dv: Vec<f64>,
}

/// Compliance and sensitivities for loads held fixed, given one
/// displacement per load solved against the current stiffness.
pub fn compliance_and_sensitivity(
    model: &Model,
    density: &DensityField,
    interp: &MaterialInterp,
    esl: &EslSet,
    displacements: &[Vec<f64>],
) -> Result<Objective> {
    if displacements.len() < esl.len() {
        return Err(Error::MissingDisplacement(displacements.len()));
    }
    let ne = model.mesh().num_elements();
    let b = density.values();
    let moduli = model.moduli(density, interp);
    let vol = model.element_volume();
    let mut dz = vec![0.0; ne];
    let mut per_load = Vec::with_capacity(esl.len());
    for d in &displacements[..esl.len()] {
        if d.len() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                actual: d.len(),
            });
        }
        let energies = model.element_energies(d);
        let mut z = 0.0;
        for e in 0..ne {
            z += moduli[e] * energies[e];
            dz[e] -= interp.modulus_derivative(b[e]) * energies[e];
        }
        per_load.push(z);
    }
    let dv = b.iter().map(|&x| vol * interp.volume_derivative(x)).collect();
    Ok(Objective {
        z: per_load.iter().sum(),
        per_load,
        dz,
        dv,
    })
}
