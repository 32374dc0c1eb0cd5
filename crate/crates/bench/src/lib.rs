//! Shared fixtures for the kernel benchmarks.

use dyntopo::driver::{preset, Problem, RunConfig};
use dyntopo::fem::Passive;
use dyntopo::simp::initial_density;
use dyntopo::{DensityField, MaterialInterp, SparseSymMatrix};

/// The cantilever preset at one resolution, with a uniform design `b0` and
/// a perturbed design `b1` (every twentieth design element +0.1).
pub struct Fixture {
    pub config: RunConfig,
    pub problem: Problem,
    pub interp: MaterialInterp,
    pub b0: DensityField,
    pub b1: DensityField,
    pub k0: SparseSymMatrix,
    pub m0: SparseSymMatrix,
}

impl Fixture {
    pub fn cantilever(nelx: usize, nely: usize) -> Fixture {
        let config = preset("cantilever_hole")
            .and_then(|c| c.with_overrides(&[format!("case.nelx={nelx}"), format!("case.nely={nely}")]))
            .expect("preset");
        let problem = Problem::new(&config).expect("problem");
        let (p, p0) = config.opt.schedule.at(usize::MAX);
        let interp = problem.interp(&config, p, p0);
        let mesh = problem.model.mesh();
        let b0 = initial_density(mesh, &interp, config.opt.volume_fraction, config.opt.b_min).expect("density");
        let mut values = b0.values().to_vec();
        let design: Vec<usize> = (0..values.len())
            .filter(|&e| mesh.passive()[e] == Passive::Design)
            .collect();
        for &e in design.iter().step_by(20) {
            values[e] = (values[e] + 0.1).min(1.0);
        }
        let b1 = DensityField::new(mesh, values, config.opt.b_min).expect("density");
        let k0 = problem.model.assemble_k(&b0, &interp).expect("K");
        let m0 = problem.model.assemble_m(&b0, &interp).expect("M");
        Fixture {
            config,
            problem,
            interp,
            b0,
            b1,
            k0,
            m0,
        }
    }
}
