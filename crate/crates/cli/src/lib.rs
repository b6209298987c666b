//! Configuration-driven experiment runner for `cantilever-core`.

pub mod experiment;
pub mod run;
pub mod spec;

pub use experiment::{run_experiment, run_sweep, sweep_point, RunError};
pub use run::{run_spec, RunOutput, Table};
pub use spec::{validate_spec, ExperimentSpec, Mode, Output, Stimulus, Sweep};
