use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    compliance_and_sensitivity, oc_update, volume_fraction, DensityFilter, MaterialInterp, OcParams,
    PenalizationSchedule,
};
use crate::error::{Error, Result};
use crate::fem::{DensityField, Model};
use crate::pod::EslSet;
use crate::sparse::factorization_count;

/// Settings of the static optimization under equivalent static loads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptConfig {
    pub volume_fraction: f64,
    pub b_min: f64,
    pub move_limit: f64,
    pub damping_exponent: f64,
    /// In element widths; 0 disables filtering.
    pub filter_radius: f64,
    pub inner_max_iter: usize,
    /// Stop once the largest density change falls to this value.
    pub inner_tol: f64,
    /// Use `E = E_min + b^p(E0 − E_min)` with `V = b`.
    pub plain_simp: bool,
    pub schedule: PenalizationSchedule,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            volume_fraction: 0.5,
            b_min: 1e-3,
            move_limit: 0.2,
            damping_exponent: 0.5,
            filter_radius: 1.5,
            inner_max_iter: 20,
            inner_tol: 1e-3,
            plain_simp: false,
            schedule: PenalizationSchedule::default(),
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("opt: {m}")));
        if !(self.volume_fraction > 0.0 && self.volume_fraction < 1.0) {
            return bad(format!("volume_fraction {} outside (0, 1)", self.volume_fraction));
        }
        if !(self.b_min >= 0.0 && self.b_min < self.volume_fraction) {
            return bad(format!("b_min {} outside [0, volume_fraction)", self.b_min));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 0.5) {
            return bad(format!("move_limit {} outside (0, 0.5]", self.move_limit));
        }
        if !(self.damping_exponent > 0.0 && self.damping_exponent <= 1.0) {
            return bad(format!("damping_exponent {} outside (0, 1]", self.damping_exponent));
        }
        if !(self.filter_radius >= 0.0 && self.filter_radius.is_finite()) {
            return bad(format!("filter_radius {} must be >= 0", self.filter_radius));
        }
        if self.inner_max_iter == 0 {
            return bad("inner_max_iter must be positive".into());
        }
        if !(self.inner_tol >= 0.0) {
            return bad("inner_tol must be >= 0".into());
        }
        self.schedule.validate()
    }

    pub fn oc_params(&self) -> OcParams {
        OcParams {
            volume_fraction: self.volume_fraction,
            move_limit: self.move_limit,
            damping_exponent: self.damping_exponent,
        }
    }

    /// Interpolation for penalization `(p, p0)` on the given material.
    pub fn interp(&self, p: f64, p0: f64, e0: f64, e_min: f64) -> MaterialInterp {
        MaterialInterp {
            plain_simp: self.plain_simp,
            ..MaterialInterp::new(p, p0, e0, e_min)
        }
    }
}

/// One inner iteration: objective at the incoming field, then the update.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRecord {
    pub iteration: usize,
    pub objective: f64,
    /// Volume fraction after the update.
    pub volume: f64,
    pub max_change: f64,
    pub p: f64,
    pub p0: f64,
    pub factorizations: usize,
}

#[derive(Debug, Clone)]
pub struct TopoptResult {
    pub density: DensityField,
    pub history: Vec<InnerRecord>,
    pub converged: bool,
}

/// Minimizes the summed compliance of the ESLs from `start` at fixed
/// penalization. Each inner iteration factors K once and solves every load
/// against it in parallel.
pub fn static_topopt(
    model: &Model,
    esl: &EslSet,
    start: &DensityField,
    config: &OptConfig,
    interp: &MaterialInterp,
) -> Result<TopoptResult> {
    config.validate()?;
    if let Some(f) = esl.loads.iter().find(|f| f.len() != model.dim()) {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: f.len(),
        });
    }
    let mesh = model.mesh();
    let filter = (config.filter_radius > 0.0).then(|| DensityFilter::new(mesh, config.filter_radius));
    let params = config.oc_params();
    let mut density = start.clone();
    let mut history = Vec::new();
    let mut converged = false;

    for it in 1..=config.inner_max_iter {
        let before = factorization_count();
        let k = model.assemble_k(&density, interp)?;
        let fact = model.factor(&k)?;
        let displacements = esl
            .loads
            .par_iter()
            .map(|f| fact.solve(f))
            .collect::<Result<Vec<_>>>()?;
        let factorizations = factorization_count() - before;
        let obj = compliance_and_sensitivity(model, &density, interp, esl, &displacements)?;
        let dz = match &filter {
            Some(f) => f.apply_sensitivity(density.values(), &obj.dz),
            None => obj.dz,
        };
        let out = oc_update(mesh, &density, &dz, &obj.dv, interp, &params)?;
        let change = out.density.max_change(&density);
        density = out.density;
        history.push(InnerRecord {
            iteration: it,
            objective: obj.z,
            volume: volume_fraction(density.values(), interp),
            max_change: change,
            p: interp.p,
            p0: interp.p0,
            factorizations,
        });
        if change <= config.inner_tol {
            converged = true;
            break;
        }
    }
    Ok(TopoptResult {
        density,
        history,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{Material, Mesh};
    use crate::simp::initial_density;

    fn cantilever(nelx: usize, nely: usize) -> (Model, Vec<f64>) {
        let mut mesh = Mesh::grid_2d(nelx, nely, 1.0 / nely as f64, 1.0 / nely as f64).unwrap();
        let fixed = (0..=nely)
            .flat_map(|j| {
                let n = mesh.node_id(0, j, 0);
                [2 * n, 2 * n + 1]
            })
            .collect();
        mesh.set_fixed(fixed);
        let tip = mesh.node_id(nelx, nely / 2, 0);
        let dof = mesh.free_index(2 * tip + 1).unwrap();
        let model = Model::new(mesh, Material::steel()).unwrap();
        let mut f = vec![0.0; model.dim()];
        f[dof] = -1000.0;
        (model, f)
    }

    #[test]
    fn cantilever_objective_decreases_and_volume_holds() {
        let (model, f) = cantilever(60, 30);
        let config = OptConfig {
            inner_max_iter: 40,
            inner_tol: 0.0,
            ..OptConfig::default()
        };
        let mat = model.material();
        let interp = config.interp(3.0, 8.0, mat.e0, mat.e_min);
        let start = initial_density(model.mesh(), &interp, 0.5, config.b_min).unwrap();
        let esl = EslSet {
            loads: vec![f],
            iteration: 0,
        };
        let res = static_topopt(&model, &esl, &start, &config, &interp).unwrap();
        let h = &res.history;
        assert_eq!(h.len(), 40);
        for w in h[5..].windows(2) {
            assert!(
                w[1].objective <= w[0].objective * (1.0 + 1e-3),
                "{} -> {}",
                w[0].objective,
                w[1].objective
            );
        }
        assert!(h.last().unwrap().objective < 0.8 * h[0].objective);
        let v = volume_fraction(res.density.values(), &interp);
        assert!((v - 0.5).abs() / 0.5 < 1e-3);
        // material leaves the mid-height region near the tip: two-bar shape
        let b = res.density.values();
        let mesh = model.mesh();
        let top = b[mesh.element_id(10, 29, 0)];
        let bottom = b[mesh.element_id(10, 0, 0)];
        let middle = b[mesh.element_id(10, 15, 0)];
        assert!(top > 0.9 && bottom > 0.9 && middle < 0.5, "{top} {bottom} {middle}");
    }

    #[test]
    fn one_factorization_per_inner_iteration() {
        let (model, f) = cantilever(12, 6);
        let mut g = f.clone();
        g.iter_mut().for_each(|x| *x *= -0.5);
        let esl = EslSet {
            loads: vec![f.clone(), g, f],
            iteration: 0,
        };
        let config = OptConfig {
            inner_max_iter: 4,
            inner_tol: 0.0,
            ..OptConfig::default()
        };
        let mat = model.material();
        let interp = config.interp(2.0, 4.0, mat.e0, mat.e_min);
        let start = initial_density(model.mesh(), &interp, 0.5, 1e-3).unwrap();
        let res = static_topopt(&model, &esl, &start, &config, &interp).unwrap();
        assert!(res.history.iter().all(|r| r.factorizations == 1));
    }

    #[test]
    fn config_validation() {
        assert!(OptConfig::default().validate().is_ok());
        let c = OptConfig {
            volume_fraction: 1.0,
            ..OptConfig::default()
        };
        assert!(c.validate().is_err());
        let c = OptConfig {
            move_limit: 0.7,
            ..OptConfig::default()
        };
        assert!(c.validate().is_err());
        let c: OptConfig = toml::from_str("volume_fraction = 0.3\nfilter_radius = 0.0").unwrap();
        assert_eq!(c.volume_fraction, 0.3);
        assert_eq!(c.schedule, PenalizationSchedule::default());
        assert!(toml::from_str::<OptConfig>("volfrac = 0.3").is_err());
    }
}
