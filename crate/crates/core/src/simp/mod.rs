//! Heaviside-SIMP interpolation, compliance sensitivities, filtering, the
//! optimality-criteria update and the inner static optimization loop.

mod filter;
mod interp;
mod objective;
mod oc;
mod schedule;
mod topopt;

pub use filter::{density_filter, DensityFilter};
pub use interp::{heaviside_volume, heaviside_volume_derivative, interpolate_stiffness, MaterialInterp};
pub use objective::{compliance_and_sensitivity, Objective};
pub use oc::{initial_density, oc_update, volume_fraction, OcOutcome, OcParams};
pub use schedule::{penalization_schedule, PenalizationSchedule, ScheduleStage};
pub use topopt::{static_topopt, InnerRecord, OptConfig, TopoptResult};
