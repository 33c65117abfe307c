//! Time integration, elliptic solves and run-time monitors.
//!
//! The layering mirrors how a run is assembled: the heat semigroup and the
//! smallness-time scan ([`heat`]), the variable-coefficient pressure solve
//! ([`elliptic`]), single linearized time steps for density and velocity
//! ([`stepper`]), the staged-coefficient iterative driver ([`picard`]), the
//! self-consistent nonlinear stepper ([`evolve`]), and post-hoc monitors for
//! continuation quantities and lifespan studies ([`monitor`], [`lifespan`]).

mod elliptic;
mod evolve;
mod heat;
mod lifespan;
mod monitor;
mod picard;
mod stepper;

pub use elliptic::{pressure_solve, PressureSolution};
pub use evolve::{evolve, EvolveReport, Forcing, StopReason};
pub use heat::{heat_semigroup, heat_smallness_time};
pub use lifespan::{lifespan_study, LifespanReport, ParabolicGain};
pub use monitor::{continuation_monitor, MonitorConfig, MonitorReport, MonitorTrigger};
pub use picard::{picard_driver, IterationRecord, PicardOutcome};
pub use stepper::{
    density_step, density_step_staged, velocity_step, velocity_step_staged, DensityScheme,
    VelocityStep,
};
