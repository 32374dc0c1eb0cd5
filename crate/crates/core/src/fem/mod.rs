//! Structured finite-element models: meshes, element matrices, global
//! assembly under a density field, load programs, and the case presets.

mod cases;
mod element;
mod loads;
mod mesh;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simp::MaterialInterp;
use crate::sparse::{Factorization, Pattern, SparseSymMatrix, Symbolic};

pub use cases::{build_case, BoxSpec, BridgeSpec, CantileverSpec, Case, CaseSpec, HoleSpec, PointLoadSpec};
pub use element::{element_matrices, ElementMatrices};
pub use loads::{Amplitude, LoadKind, LoadProgram, MovingLoad, PointLoad, RandomLoad};
pub use mesh::{ElementType, Mesh, Passive};

/// Isotropic linear elastic material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Material {
    /// Young's modulus of solid material (Pa).
    pub e0: f64,
    /// Modulus assigned to void (Pa).
    pub e_min: f64,
    pub nu: f64,
    /// Mass density (kg/m³).
    pub density: f64,
    /// Out-of-plane thickness for 2D meshes (m).
    pub thickness: f64,
}

impl Material {
    pub fn steel() -> Self {
        Material {
            e0: 201e9,
            e_min: 201e9 * 1e-9,
            nu: 0.33,
            density: 7850.0,
            thickness: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e0 > self.e_min && self.e_min > 0.0) {
            return Err(Error::InvalidParameter("need E0 > E_min > 0".into()));
        }
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(Error::InvalidParameter("Poisson ratio must lie in (0, 0.5)".into()));
        }
        if !(self.density > 0.0 && self.thickness > 0.0) {
            return Err(Error::InvalidParameter("density and thickness must be positive".into()));
        }
        Ok(())
    }
}

impl Default for Material {
    fn default() -> Self {
        Material::steel()
    }
}

/// Per-element design variables in `[b_min, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
    b_min: f64,
}

impl DensityField {
    /// Validates the bounds and pins passive elements (void at `b_min`,
    /// solid at 1).
    pub fn new(mesh: &Mesh, mut values: Vec<f64>, b_min: f64) -> Result<Self> {
        if values.len() != mesh.num_elements() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_elements(),
                actual: values.len(),
            });
        }
        if !(0.0..1.0).contains(&b_min) {
            return Err(Error::InvalidParameter(format!("b_min = {b_min} outside [0, 1)")));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= b_min && **v <= 1.0)) {
            return Err(Error::InvalidParameter(format!("density {v} outside [{b_min}, 1]")));
        }
        for (v, status) in values.iter_mut().zip(mesh.passive()) {
            match status {
                Passive::Void => *v = b_min,
                Passive::Solid => *v = 1.0,
                Passive::Design => {}
            }
        }
        Ok(DensityField { values, b_min })
    }

    pub fn uniform(mesh: &Mesh, value: f64, b_min: f64) -> Result<Self> {
        Self::new(mesh, vec![value; mesh.num_elements()], b_min)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn b_min(&self) -> f64 {
        self.b_min
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest elementwise change against another field.
    pub fn max_change(&self, other: &DensityField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mean_abs_difference(&self, other: &DensityField) -> f64 {
        let n = self.values.len().max(1) as f64;
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n
    }
}

/// A mesh and material together with the cached scatter map used to assemble
/// global matrices over the free DOFs.
#[derive(Debug)]
pub struct Model {
    mesh: Mesh,
    material: Material,
    elem: ElementMatrices,
    pattern: Arc<Pattern>,
    /// local DOF → free index, `ndof` entries per element
    elem_free: Vec<Option<usize>>,
    /// per element, `(row·ndof + col, value position)` over local pairs
    /// with `row >= col` in the global lower triangle
    scatter_ptr: Vec<usize>,
    scatter: Vec<(u32, usize)>,
    symbolic: OnceLock<Symbolic>,
}

impl Model {
    pub fn new(mesh: Mesh, material: Material) -> Result<Self> {
        material.validate()?;
        if mesh.fixed_dofs().is_empty() {
            return Err(Error::InvalidCase(
                "no fixed DOFs: the structure has rigid-body modes".into(),
            ));
        }
        let elem = element_matrices(mesh.element_type(), &material, mesh.element_size());
        let ndof = mesh.element_type().dofs();
        let ne = mesh.num_elements();

        let mut elem_free = Vec::with_capacity(ne * ndof);
        for e in 0..ne {
            elem_free.extend(mesh.element_dofs(e).into_iter().map(|d| mesh.free_index(d)));
        }

        let mut pairs = Vec::with_capacity(ne * ndof * (ndof + 1) / 2);
        for e in 0..ne {
            let local = &elem_free[e * ndof..(e + 1) * ndof];
            for a in 0..ndof {
                for b in 0..=a {
                    if let (Some(i), Some(j)) = (local[a], local[b]) {
                        pairs.push((i.max(j), i.min(j)));
                    }
                }
            }
        }
        let pattern = Arc::new(Pattern::from_lower_pairs(mesh.num_free(), pairs));

        let mut scatter_ptr = Vec::with_capacity(ne + 1);
        let mut scatter = Vec::new();
        scatter_ptr.push(0);
        for e in 0..ne {
            let local = &elem_free[e * ndof..(e + 1) * ndof];
            for a in 0..ndof {
                for b in 0..=a {
                    if let (Some(i), Some(j)) = (local[a], local[b]) {
                        let pos = pattern
                            .find(i.max(j), i.min(j))
                            .expect("pattern built from the same pairs");
                        scatter.push(((a * ndof + b) as u32, pos));
                    }
                }
            }
            scatter_ptr.push(scatter.len());
        }

        Ok(Model {
            mesh,
            material,
            elem,
            pattern,
            elem_free,
            scatter_ptr,
            scatter,
            symbolic: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn element_matrices(&self) -> &ElementMatrices {
        &self.elem
    }

    /// Order `h` of the reduced system.
    pub fn dim(&self) -> usize {
        self.mesh.num_free()
    }

    pub fn pattern(&self) -> &Arc<Pattern> {
        &self.pattern
    }

    /// Young's moduli of every element under `interp`.
    pub fn moduli(&self, density: &DensityField, interp: &MaterialInterp) -> Vec<f64> {
        density.values().iter().map(|&b| interp.modulus(b)).collect()
    }

    /// Volume fractions `V_e(b_e)` of every element.
    pub fn volume_fractions(&self, density: &DensityField, interp: &MaterialInterp) -> Vec<f64> {
        density.values().iter().map(|&b| interp.volume(b)).collect()
    }

    /// `Σ_e scale_e · scatter(k0)`.
    pub fn stiffness_from_moduli(&self, moduli: &[f64]) -> Result<SparseSymMatrix> {
        self.scatter_scaled(&self.elem.k0, moduli)
    }

    /// `Σ_e scale_e · scatter(m0)`.
    pub fn mass_from_scales(&self, scales: &[f64]) -> Result<SparseSymMatrix> {
        self.scatter_scaled(&self.elem.m0, scales)
    }

    /// Global stiffness over the free DOFs with Heaviside-SIMP moduli.
    pub fn assemble_k(&self, density: &DensityField, interp: &MaterialInterp) -> Result<SparseSymMatrix> {
        self.stiffness_from_moduli(&self.moduli(density, interp))
    }

    /// Global consistent mass over the free DOFs scaled by `V_e(b_e)`.
    pub fn assemble_m(&self, density: &DensityField, interp: &MaterialInterp) -> Result<SparseSymMatrix> {
        self.mass_from_scales(&self.volume_fractions(density, interp))
    }

    fn scatter_scaled(&self, local: &nalgebra::DMatrix<f64>, scales: &[f64]) -> Result<SparseSymMatrix> {
        let ne = self.mesh.num_elements();
        if scales.len() != ne {
            return Err(Error::DimensionMismatch {
                expected: ne,
                actual: scales.len(),
            });
        }
        let ndof = self.mesh.element_type().dofs();
        // row-major copy so the flat index is `row·ndof + col`
        let flat: Vec<f64> = (0..ndof * ndof).map(|k| local[(k / ndof, k % ndof)]).collect();
        let mut values = vec![0.0; self.pattern.nnz()];
        for (e, &s) in scales.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for &(k, pos) in &self.scatter[self.scatter_ptr[e]..self.scatter_ptr[e + 1]] {
                values[pos] += s * flat[k as usize];
            }
        }
        SparseSymMatrix::from_parts(Arc::clone(&self.pattern), values)
    }

    /// Ordering and elimination tree for this model's matrices, computed once.
    pub fn symbolic(&self) -> Result<&Symbolic> {
        if let Some(s) = self.symbolic.get() {
            return Ok(s);
        }
        let s = Symbolic::analyze(&SparseSymMatrix::zeros(Arc::clone(&self.pattern)))?;
        Ok(self.symbolic.get_or_init(|| s))
    }

    /// Factors a matrix assembled on this model's pattern.
    pub fn factor(&self, a: &SparseSymMatrix) -> Result<Factorization> {
        self.symbolic()?.factor(a)
    }

    /// Element displacement vector gathered from a reduced solution.
    pub fn element_displacement(&self, e: usize, u: &[f64], out: &mut [f64]) {
        let ndof = self.mesh.element_type().dofs();
        for (o, idx) in out.iter_mut().zip(&self.elem_free[e * ndof..(e + 1) * ndof]) {
            *o = idx.map_or(0.0, |i| u[i]);
        }
    }

    /// `d_eᵀ·k0·d_e` for every element.
    pub fn element_energies(&self, u: &[f64]) -> Vec<f64> {
        let ndof = self.mesh.element_type().dofs();
        let k0 = &self.elem.k0;
        let mut de = vec![0.0; ndof];
        (0..self.mesh.num_elements())
            .map(|e| {
                self.element_displacement(e, u, &mut de);
                let mut acc = 0.0;
                for a in 0..ndof {
                    if de[a] == 0.0 {
                        continue;
                    }
                    let row: f64 = (0..ndof).map(|b| k0[(a, b)] * de[b]).sum();
                    acc += de[a] * row;
                }
                acc
            })
            .collect()
    }

    /// `Σ_e V_e·ρ·vol_e`.
    pub fn total_mass(&self, density: &DensityField, interp: &MaterialInterp) -> f64 {
        let per = self.material.density * self.element_volume();
        self.volume_fractions(density, interp).iter().map(|v| v * per).sum()
    }

    /// Element volume, including the thickness of 2D elements.
    pub fn element_volume(&self) -> f64 {
        match self.mesh.element_type() {
            ElementType::Quad4 => self.mesh.element_volume() * self.material.thickness,
            ElementType::Hex8 => self.mesh.element_volume(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::factor_spd;

    fn cantilever(nelx: usize, nely: usize) -> Model {
        let mut mesh = Mesh::grid_2d(nelx, nely, 0.1, 0.1).unwrap();
        let fixed = (0..=nely)
            .flat_map(|j| {
                let n = mesh.node_id(0, j, 0);
                [2 * n, 2 * n + 1]
            })
            .collect();
        mesh.set_fixed(fixed);
        Model::new(mesh, Material::steel()).unwrap()
    }

    fn interp() -> MaterialInterp {
        MaterialInterp::new(3.0, 8.0, 201e9, 201.0)
    }

    #[test]
    fn solid_field_gives_solid_stiffness() {
        let m = cantilever(4, 2);
        let b = DensityField::uniform(m.mesh(), 1.0, 1e-3).unwrap();
        let k = m.assemble_k(&b, &interp()).unwrap();
        let e0 = m.stiffness_from_moduli(&vec![201e9; 8]).unwrap();
        for (x, y) in k.values().iter().zip(e0.values()) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }

    #[test]
    fn void_field_scales_stiffness() {
        let m = cantilever(4, 2);
        let interp = MaterialInterp::new(3.0, 8.0, 1.0, 1e-9);
        let b = DensityField::uniform(m.mesh(), 0.0, 0.0).unwrap();
        let k = m.assemble_k(&b, &interp).unwrap();
        let solid = m.stiffness_from_moduli(&[1.0; 8]).unwrap();
        let scale = solid.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in k.values().iter().zip(solid.values()) {
            assert!((x - 1e-9 * y).abs() <= 1e-12 * 1e-9 * scale);
        }
    }

    #[test]
    fn single_element_is_k0_on_free_dofs() {
        let mut mesh = Mesh::grid_2d(1, 1, 1.0, 1.0).unwrap();
        mesh.set_fixed(vec![0, 1, 6, 7]);
        let m = Model::new(mesh, Material::steel()).unwrap();
        let k = m.stiffness_from_moduli(&[2.5]).unwrap();
        let k0 = &m.element_matrices().k0;
        let dofs = m.mesh().element_dofs(0);
        for a in 0..8 {
            for b in 0..8 {
                let (Some(i), Some(j)) = (m.mesh().free_index(dofs[a]), m.mesh().free_index(dofs[b])) else {
                    continue;
                };
                assert!((k.get(i, j) - 2.5 * k0[(a, b)]).abs() < 1e-12 * k0.amax());
            }
        }
    }

    #[test]
    fn stiffness_linear_in_moduli() {
        let m = cantilever(5, 3);
        let moduli: Vec<f64> = (0..15).map(|e| 1.0 + e as f64).collect();
        let k1 = m.stiffness_from_moduli(&moduli).unwrap();
        let scaled: Vec<f64> = moduli.iter().map(|v| 3.5 * v).collect();
        let k2 = m.stiffness_from_moduli(&scaled).unwrap();
        let scale = k2.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in k1.values().iter().zip(k2.values()) {
            assert!((3.5 * x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn any_density_gives_spd_stiffness() {
        let m = cantilever(6, 3);
        let vals: Vec<f64> = (0..18).map(|e| 0.001 + (e as f64 * 0.37) % 0.999).collect();
        let b = DensityField::new(m.mesh(), vals, 1e-3).unwrap();
        let k = m.assemble_k(&b, &interp()).unwrap();
        factor_spd(&k).unwrap();
        m.factor(&k).unwrap();
    }

    #[test]
    fn mass_totals() {
        let m = cantilever(4, 2);
        let interp = interp();
        let solid = DensityField::uniform(m.mesh(), 1.0, 1e-3).unwrap();
        let mm = m.assemble_m(&solid, &interp).unwrap();
        assert!(mm.frobenius_norm() > 0.0);

        let void = DensityField::uniform(m.mesh(), 0.0, 0.0).unwrap();
        assert!(m.assemble_m(&void, &interp).unwrap().is_zero());

        let vals: Vec<f64> = (0..8).map(|e| 0.1 * e as f64 + 0.05).collect();
        let mixed = DensityField::new(m.mesh(), vals.clone(), 1e-3).unwrap();
        let direct: f64 = vals
            .iter()
            .map(|&b| crate::simp::heaviside_volume(b, 8.0) * 7850.0 * 0.1 * 0.1 * 0.01)
            .sum();
        assert!((m.total_mass(&mixed, &interp) - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn density_field_pins_passive() {
        let mut mesh = Mesh::grid_2d(2, 1, 1.0, 1.0).unwrap();
        mesh.set_passive(0, Passive::Void);
        mesh.set_passive(1, Passive::Solid);
        let b = DensityField::uniform(&mesh, 0.5, 1e-3).unwrap();
        assert_eq!(b.values(), &[1e-3, 1.0]);
        assert!(DensityField::uniform(&mesh, 1.5, 1e-3).is_err());
        assert!(DensityField::uniform(&mesh, 1e-4, 1e-3).is_err());
    }

    #[test]
    fn model_requires_supports() {
        let mesh = Mesh::grid_2d(2, 1, 1.0, 1.0).unwrap();
        assert!(Model::new(mesh, Material::steel()).is_err());
    }
}
