use std::time::Instant;

use super::config::{EslMode, RunConfig, SolverMode};
use super::eigen::design_frequency;
use super::output::read_density_grid;
use crate::error::{Error, Result};
use crate::fem::{build_case, Case, DensityField, LoadProgram, Model};
use crate::newmark::{solve_transient_with, NewmarkParams, ProgramLoads, SnapshotMatrix};
use crate::osdca::{maybe_refresh_baseline, solve_transient_reduced, Baseline};
use crate::pod::{build_esl, exact_esl, EslSet, PodBasis};
use crate::simp::{initial_density, static_topopt, volume_fraction, InnerRecord, MaterialInterp};
use crate::sparse::{dot, factorization_count};

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub p: f64,
    pub p0: f64,
    /// `Σ_i F(t_i)ᵀ·d(t_i)` of the analysed design.
    pub compliance: f64,
    /// Volume fraction after the update.
    pub volume: f64,
    pub max_change: f64,
    pub m_esl: usize,
    /// Basis constructions in the reduced solve (0 in full mode).
    pub rebuilds: usize,
    pub guard_rebuilds: usize,
    pub refresh: bool,
    /// Structural change checked against `tol_rb` (`None` when the baseline
    /// was first built or in full mode).
    pub structural_change: Option<f64>,
    pub inner_iterations: usize,
    pub frequency_hz: Option<f64>,
    pub singular_values: Vec<f64>,
    pub t_dyn_s: f64,
    pub t_pod_s: f64,
    pub t_opt_s: f64,
}

/// Factorizations by the stage that asked for them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FactorizationCounts {
    /// Full-mode transient solves.
    pub dynamic: usize,
    /// OSDCA baseline builds and refreshes.
    pub refresh: usize,
    /// Mass factorizations for a non-zero initial acceleration.
    pub mass: usize,
    /// Inner static iterations.
    pub static_opt: usize,
    /// Frequency evaluations.
    pub eigen: usize,
    /// Full solves of the final design evaluation.
    pub evaluation: usize,
}

impl FactorizationCounts {
    pub fn total(&self) -> usize {
        self.dynamic + self.refresh + self.mass + self.static_opt + self.eigen + self.evaluation
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub dynamic: f64,
    pub pod: f64,
    pub opt: f64,
    pub eigen: f64,
    pub evaluation: f64,
    pub total: f64,
}

/// Dynamic compliance and frequency of a design under the final
/// penalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignEvaluation {
    pub compliance: f64,
    pub frequency_hz: f64,
    pub volume: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub case: String,
    pub records: Vec<IterationRecord>,
    /// `(outer k, record)` for every inner iteration.
    pub inner: Vec<(usize, InnerRecord)>,
    pub converged: bool,
    pub factorizations: FactorizationCounts,
    /// Kernel counter difference over the whole run.
    pub factorizations_counted: usize,
    pub times: StageTimes,
    /// Uniform design at the target volume under the final penalization.
    pub initial: Option<DesignEvaluation>,
    pub optimized: Option<DesignEvaluation>,
    pub final_density: DensityField,
    /// Density fields kept for output, `(k, field)`.
    pub snapshots: Vec<(usize, DensityField)>,
    pub mesh_dims: [usize; 3],
    /// Element edge lengths (m).
    pub element_size: [f64; 3],
}

impl RunReport {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn total_refreshes(&self) -> usize {
        self.records.iter().filter(|r| r.refresh).count()
    }
}

/// Mesh, model and load program of a config.
pub struct Problem {
    pub model: Model,
    pub program: LoadProgram,
    pub params: NewmarkParams,
}

impl Problem {
    pub fn new(config: &RunConfig) -> Result<Self> {
        let Case { mesh, material, loads } = build_case(&config.case, config.run.seed)?;
        let params = NewmarkParams {
            alpha: config.newmark.alpha,
            beta: config.newmark.beta,
            ..NewmarkParams::for_program(&loads)
        };
        Ok(Problem {
            model: Model::new(mesh, material)?,
            program: loads,
            params,
        })
    }

    pub fn interp(&self, config: &RunConfig, p: f64, p0: f64) -> MaterialInterp {
        let m = self.model.material();
        config.opt.interp(p, p0, m.e0, m.e_min)
    }

    pub fn loads(&self) -> ProgramLoads<'_> {
        ProgramLoads {
            mesh: self.model.mesh(),
            program: &self.program,
        }
    }

    /// `Σ_i F(t_i)ᵀ·d(t_i)` over the snapshot instants.
    pub fn dynamic_compliance(&self, u: &SnapshotMatrix) -> Result<f64> {
        let mesh = self.model.mesh();
        let mut z = 0.0;
        for (i, &t) in u.times().iter().enumerate() {
            let f = self.program.force_at(mesh, t.min(self.program.t_end))?;
            z += dot(&f, u.column(i));
        }
        Ok(z)
    }

    /// Full Newmark solve of a design; one factorization of `K̂`.
    pub fn full_transient(
        &self,
        config: &RunConfig,
        density: &DensityField,
        interp: &MaterialInterp,
    ) -> Result<SnapshotMatrix> {
        let k = self.model.assemble_k(density, interp)?;
        let m = self.model.assemble_m(density, interp)?;
        solve_transient_with(
            Some(self.model.symbolic()?),
            &k,
            &m,
            &config.newmark.damping,
            &self.loads(),
            &self.params,
            None,
            None,
        )
    }

    /// Starting field: from file when configured, else the uniform field at
    /// the target volume.
    pub fn start_density(&self, config: &RunConfig, interp: &MaterialInterp) -> Result<DensityField> {
        let mesh = self.model.mesh();
        match &config.run.initial_density {
            Some(path) => {
                let (dims, values) = read_density_grid(path)?;
                let expected = [mesh.nelx(), mesh.nely(), if mesh.is_3d() { mesh.nelz() } else { 1 }];
                if dims != expected {
                    return Err(Error::InvalidCase(format!(
                        "initial density grid is {dims:?}, mesh is {expected:?}"
                    )));
                }
                let b_min = config.opt.b_min;
                DensityField::new(mesh, values.into_iter().map(|v| v.clamp(b_min, 1.0)).collect(), b_min)
            }
            None => initial_density(mesh, interp, config.opt.volume_fraction, config.opt.b_min),
        }
    }
}

struct Clock {
    enabled: bool,
}

impl Clock {
    fn time<T>(&self, f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
        let start = Instant::now();
        let out = f()?;
        let dt = if self.enabled {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        Ok((out, dt))
    }
}

/// Output of the dynamic stage of one outer iteration.
struct DynamicStage {
    u: SnapshotMatrix,
    rebuilds: usize,
    guard_rebuilds: usize,
    refresh: bool,
    structural_change: Option<f64>,
}

/// The outer loop: transient analysis, POD, equivalent static loads, static
/// optimization, until the largest density change reaches `tol_dy` or
/// `max_iter` is hit.
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let run_start = Instant::now();
    let clock = Clock {
        enabled: config.run.timings,
    };
    let counter_start = factorization_count();
    let problem = Problem::new(config)?;
    let model = &problem.model;
    let mesh = model.mesh();
    let schedule = &config.opt.schedule;

    let (p, p0) = schedule.at(1);
    let mut density = problem.start_density(config, &problem.interp(config, p, p0))?;
    let mut counts = FactorizationCounts::default();
    let mut times = StageTimes::default();
    let mut records = Vec::new();
    let mut inner = Vec::new();
    let mut snapshots = Vec::new();
    let mut baseline: Option<Baseline> = None;
    let mut prev_moduli: Vec<f64> = Vec::new();
    let mut converged = false;

    for k in 1..=config.run.max_iter {
        let (p, p0) = schedule.at(k);
        let interp = problem.interp(config, p, p0);
        let stage = |e: Error| e.at_iteration(k);

        // transient response
        let before = factorization_count();
        let (dynamic, t_dyn) = clock
            .time(|| dynamic_stage(config, &problem, &density, &interp, &mut baseline, &prev_moduli))
            .map_err(stage)?;
        let used = factorization_count() - before;
        let dyn_facts = match config.run.solver {
            SolverMode::FullNewmark => usize::from(dynamic.is_some()),
            SolverMode::Osdca => usize::from(dynamic.as_ref().is_some_and(|d| d.refresh)),
        };
        match config.run.solver {
            SolverMode::FullNewmark => counts.dynamic += dyn_facts,
            SolverMode::Osdca => counts.refresh += dyn_facts,
        }
        counts.mass += used - dyn_facts;
        prev_moduli = model.moduli(&density, &interp);

        // equivalent static loads
        let ((esl, singular_values, compliance), t_pod) = clock
            .time(|| -> Result<_> {
                let kmat = model.assemble_k(&density, &interp)?;
                match &dynamic {
                    None => {
                        let f = problem.program.peak_static(mesh)?;
                        Ok((
                            EslSet {
                                loads: vec![f],
                                iteration: k,
                            },
                            Vec::new(),
                            0.0,
                        ))
                    }
                    Some(d) => {
                        let z = problem.dynamic_compliance(&d.u)?;
                        match config.run.esl {
                            EslMode::Exact => Ok((exact_esl(&kmat, &d.u, k)?, Vec::new(), z)),
                            _ => {
                                let pod = PodBasis::from_snapshots(&d.u, config.pod.eps, config.pod.squared_energy)?;
                                let mut esl = build_esl(&kmat, &pod.modes, k)?;
                                if config.pod.weighted {
                                    let s1 = pod.singular_values[0];
                                    for (f, s) in esl.loads.iter_mut().zip(&pod.singular_values) {
                                        f.iter_mut().for_each(|x| *x *= s / s1);
                                    }
                                }
                                Ok((esl, pod.singular_values, z))
                            }
                        }
                    }
                }
            })
            .map_err(stage)?;

        // static optimization
        let (result, t_opt) = clock
            .time(|| static_topopt(model, &esl, &density, &config.opt, &interp))
            .map_err(stage)?;
        counts.static_opt += result.history.iter().map(|r| r.factorizations).sum::<usize>();
        let max_change = result.density.max_change(&density);
        density = result.density;

        let (frequency_hz, t_eig) = if config.run.track_frequency {
            let before = factorization_count();
            let (f, t) = clock
                .time(|| design_frequency(model, &density, &interp))
                .map_err(stage)?;
            counts.eigen += factorization_count() - before;
            (Some(f), t)
        } else {
            (None, 0.0)
        };

        times.dynamic += t_dyn;
        times.pod += t_pod;
        times.opt += t_opt;
        times.eigen += t_eig;
        let (rebuilds, guard_rebuilds, refresh, structural_change) =
            dynamic.as_ref().map_or((0, 0, false, None), |d| {
                (d.rebuilds, d.guard_rebuilds, d.refresh, d.structural_change)
            });
        let record = IterationRecord {
            k,
            p,
            p0,
            compliance,
            volume: volume_fraction(density.values(), &interp),
            max_change,
            m_esl: esl.len(),
            rebuilds,
            guard_rebuilds,
            refresh,
            structural_change,
            inner_iterations: result.history.len(),
            frequency_hz,
            singular_values,
            t_dyn_s: t_dyn,
            t_pod_s: t_pod,
            t_opt_s: t_opt,
        };
        log::info!(
            "k={k} p={p} p0={p0} c={:.4e} vol={:.4} change={:.4} m={} refresh={} rebuilds={}",
            record.compliance,
            record.volume,
            record.max_change,
            record.m_esl,
            record.refresh,
            record.rebuilds
        );
        records.push(record);
        inner.extend(result.history.into_iter().map(|r| (k, r)));
        if config.run.log_every > 0 && k % config.run.log_every == 0 {
            snapshots.push((k, density.clone()));
        }

        let stage_ok = !config.run.require_final_stage || schedule.is_final(k);
        if max_change <= config.run.tol_dy && stage_ok {
            converged = true;
            break;
        }
    }

    let (initial, optimized) = if config.run.evaluate {
        let (p, p0) = schedule.at(records.len().max(1));
        let interp = problem.interp(config, p, p0);
        let start = initial_density(mesh, &interp, config.opt.volume_fraction, config.opt.b_min)?;
        let mut evaluate = |d: &DensityField| -> Result<DesignEvaluation> {
            let before = factorization_count();
            let (u, t) = clock.time(|| problem.full_transient(config, d, &interp))?;
            let used = factorization_count() - before;
            counts.evaluation += 1;
            counts.mass += used - 1;
            times.evaluation += t;
            let before = factorization_count();
            let (frequency_hz, t) = clock.time(|| design_frequency(model, d, &interp))?;
            counts.eigen += factorization_count() - before;
            times.eigen += t;
            Ok(DesignEvaluation {
                compliance: problem.dynamic_compliance(&u)?,
                frequency_hz,
                volume: volume_fraction(d.values(), &interp),
            })
        };
        (Some(evaluate(&start)?), Some(evaluate(&density)?))
    } else {
        (None, None)
    };

    times.total = if config.run.timings {
        run_start.elapsed().as_secs_f64()
    } else {
        0.0
    };
    let dims = [mesh.nelx(), mesh.nely(), if mesh.is_3d() { mesh.nelz() } else { 1 }];
    Ok(RunReport {
        case: config.case.name().to_string(),
        records,
        inner,
        converged,
        factorizations: counts,
        factorizations_counted: factorization_count() - counter_start,
        times,
        initial,
        optimized,
        final_density: density,
        snapshots,
        mesh_dims: dims,
        element_size: mesh.element_size(),
    })
}

fn dynamic_stage(
    config: &RunConfig,
    problem: &Problem,
    density: &DensityField,
    interp: &MaterialInterp,
    baseline: &mut Option<Baseline>,
    prev_moduli: &[f64],
) -> Result<Option<DynamicStage>> {
    if config.run.esl == EslMode::PeakStatic {
        return Ok(None);
    }
    let model = &problem.model;
    let damping = &config.newmark.damping;
    match config.run.solver {
        SolverMode::FullNewmark => Ok(Some(DynamicStage {
            u: problem.full_transient(config, density, interp)?,
            rebuilds: 0,
            guard_rebuilds: 0,
            refresh: false,
            structural_change: None,
        })),
        SolverMode::Osdca => {
            let (base, refresh, change) = match baseline.take() {
                None => (
                    Baseline::build(model, density, interp, damping, &problem.params)?,
                    true,
                    None,
                ),
                Some(b) => {
                    let (b, d) = maybe_refresh_baseline(
                        b,
                        prev_moduli,
                        density,
                        &config.osdca,
                        model,
                        interp,
                        damping,
                        &problem.params,
                    )?;
                    (b, d.refreshed, Some(d.change))
                }
            };
            let k = model.assemble_k(density, interp)?;
            let m = model.assemble_m(density, interp)?;
            let (u, stats) =
                solve_transient_reduced(&base, &k, &m, damping, &problem.loads(), &problem.params, &config.osdca)?;
            *baseline = Some(base);
            Ok(Some(DynamicStage {
                u,
                rebuilds: stats.rebuilds,
                guard_rebuilds: stats.guard_rebuilds,
                refresh,
                structural_change: change,
            }))
        }
    }
}
