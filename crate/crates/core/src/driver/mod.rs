//! The outer optimization loop, run configuration, natural-frequency
//! evaluation, solver comparison and file outputs.

mod compare;
mod config;
mod eigen;
mod output;
mod run;

pub use compare::{compare_modes, ladder_rung, ComparisonRecord, ComparisonReport, LadderRung};
pub use config::{preset, EslMode, NewmarkSection, PodSection, RunConfig, RunSection, SolverMode, PRESETS};
pub use eigen::{design_frequency, first_natural_frequency, first_natural_frequency_with, frequency_mass_scale};
pub use output::{
    comparison_csv, density_grid_text, export_outputs, inner_csv, iterations_csv, ladder_csv, osdca_csv,
    parse_density_grid, pgm_bytes, read_density_grid, spectrum_csv, summary_text, vtk_text, write_density_grid,
};
pub use run::{run, DesignEvaluation, FactorizationCounts, IterationRecord, Problem, RunReport, StageTimes};
