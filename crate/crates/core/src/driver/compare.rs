use std::time::Instant;

use super::config::{RunConfig, SolverMode};
use super::run::{run, Problem};
use crate::error::Result;
use crate::fem::{DensityField, Passive};
use crate::osdca::{maybe_refresh_baseline, solve_transient_reduced, Baseline};
use crate::simp::initial_density;
use crate::sparse::factorization_count;

/// Full and reduced transient solves of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRecord {
    pub k: usize,
    pub max_nodal_error: f64,
    pub max_column_error: f64,
    pub refresh: bool,
    pub structural_change: Option<f64>,
    pub rebuilds: usize,
    pub guard_rebuilds: usize,
    pub full_time_s: f64,
    pub reduced_time_s: f64,
}

/// Timing of one mesh size.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub nelx: usize,
    pub nely: usize,
    pub dofs: usize,
    /// Factor `K̂` and integrate.
    pub full_time_s: f64,
    /// Integrate against an existing baseline.
    pub reduced_time_s: f64,
    /// Building the baseline (one factorization).
    pub baseline_time_s: f64,
    pub max_nodal_error: f64,
}

impl LadderRung {
    /// `full / reduced` per dynamic solve.
    pub fn speedup(&self) -> f64 {
        self.full_time_s / self.reduced_time_s.max(1e-300)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub records: Vec<ComparisonRecord>,
    /// One per design in full mode.
    pub full_factorizations: usize,
    /// Baseline builds and refreshes in reduced mode.
    pub reduced_factorizations: usize,
    pub ladder: Vec<LadderRung>,
}

impl ComparisonReport {
    /// `(steps where the speedup did not drop, total steps)` along the
    /// ladder.
    pub fn speedup_trend(&self) -> (usize, usize) {
        let steps = self.ladder.len().saturating_sub(1);
        let up = self
            .ladder
            .windows(2)
            .filter(|w| w[1].speedup() >= w[0].speedup())
            .count();
        (up, steps)
    }
}

/// Runs the optimization with full transient solves, then replays its
/// sequence of designs through both solvers: full Newmark with one
/// factorization per design, and OSDCA with baseline refreshes. Optionally
/// times both solvers over a ladder of mesh sizes.
pub fn compare_modes(config: &RunConfig, ladder: &[(usize, usize)]) -> Result<ComparisonReport> {
    let mut cfg = config.clone();
    cfg.run.solver = SolverMode::FullNewmark;
    cfg.run.log_every = 1;
    cfg.run.evaluate = false;
    cfg.run.track_frequency = false;
    let report = run(&cfg)?;

    let problem = Problem::new(&cfg)?;
    let model = &problem.model;
    let damping = &cfg.newmark.damping;
    let schedule = &cfg.opt.schedule;
    let (p, p0) = schedule.at(1);
    let mut designs = vec![problem.start_density(&cfg, &problem.interp(&cfg, p, p0))?];
    designs.extend(report.snapshots.iter().map(|(_, d)| d.clone()));
    designs.truncate(report.records.len());

    let mut records = Vec::new();
    let mut baseline: Option<Baseline> = None;
    let mut prev_moduli = Vec::new();
    let (mut full_facts, mut reduced_facts) = (0, 0);
    for (i, density) in designs.iter().enumerate() {
        let k = i + 1;
        let (p, p0) = schedule.at(k);
        let interp = problem.interp(&cfg, p, p0);

        let before = factorization_count();
        let start = Instant::now();
        let full = problem.full_transient(&cfg, density, &interp)?;
        let full_time_s = start.elapsed().as_secs_f64();
        full_facts += factorization_count() - before;

        let start = Instant::now();
        let before = factorization_count();
        let (base, refresh, change) = match baseline.take() {
            None => (
                Baseline::build(model, density, &interp, damping, &problem.params)?,
                true,
                None,
            ),
            Some(b) => {
                let (b, d) = maybe_refresh_baseline(
                    b,
                    &prev_moduli,
                    density,
                    &cfg.osdca,
                    model,
                    &interp,
                    damping,
                    &problem.params,
                )?;
                (b, d.refreshed, Some(d.change))
            }
        };
        reduced_facts += factorization_count() - before;
        let kmat = model.assemble_k(density, &interp)?;
        let mmat = model.assemble_m(density, &interp)?;
        let (reduced, stats) = solve_transient_reduced(
            &base,
            &kmat,
            &mmat,
            damping,
            &problem.loads(),
            &problem.params,
            &cfg.osdca,
        )?;
        let reduced_time_s = start.elapsed().as_secs_f64();
        baseline = Some(base);
        prev_moduli = model.moduli(density, &interp);

        records.push(ComparisonRecord {
            k,
            max_nodal_error: reduced.max_relative_nodal_error(&full),
            max_column_error: reduced.max_relative_column_error(&full),
            refresh,
            structural_change: change,
            rebuilds: stats.rebuilds,
            guard_rebuilds: stats.guard_rebuilds,
            full_time_s,
            reduced_time_s,
        });
    }

    let ladder = ladder
        .iter()
        .map(|&(nelx, nely)| ladder_rung(config, nelx, nely))
        .collect::<Result<Vec<_>>>()?;
    Ok(ComparisonReport {
        records,
        full_factorizations: full_facts,
        reduced_factorizations: reduced_facts,
        ladder,
    })
}

/// Times one full and one reduced solve at a resolution: the baseline is the
/// uniform start design and every twentieth design element gains 0.1.
pub fn ladder_rung(config: &RunConfig, nelx: usize, nely: usize) -> Result<LadderRung> {
    let mut cfg = config.clone();
    cfg.case = config.case.with_resolution(nelx, nely);
    let problem = Problem::new(&cfg)?;
    let model = &problem.model;
    let mesh = model.mesh();
    let (p, p0) = cfg.opt.schedule.at(usize::MAX);
    let interp = problem.interp(&cfg, p, p0);
    let damping = &cfg.newmark.damping;
    let b0 = initial_density(mesh, &interp, cfg.opt.volume_fraction, cfg.opt.b_min)?;
    let mut values = b0.values().to_vec();
    let design: Vec<usize> = (0..values.len())
        .filter(|&e| mesh.passive()[e] == Passive::Design)
        .collect();
    for &e in design.iter().step_by(20) {
        values[e] = (values[e] + 0.1).min(1.0);
    }
    let b1 = DensityField::new(mesh, values, cfg.opt.b_min)?;
    model.symbolic()?;

    let start = Instant::now();
    let base = Baseline::build(model, &b0, &interp, damping, &problem.params)?;
    let baseline_time_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let full = problem.full_transient(&cfg, &b1, &interp)?;
    let full_time_s = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let k = model.assemble_k(&b1, &interp)?;
    let m = model.assemble_m(&b1, &interp)?;
    let (reduced, _) = solve_transient_reduced(&base, &k, &m, damping, &problem.loads(), &problem.params, &cfg.osdca)?;
    let reduced_time_s = start.elapsed().as_secs_f64();

    Ok(LadderRung {
        nelx,
        nely,
        dofs: model.dim(),
        full_time_s,
        reduced_time_s,
        baseline_time_s,
        max_nodal_error: reduced.max_relative_nodal_error(&full),
    })
}
