//! Experiment runner behind the CLI: table sweeps, convergence studies,
//! tiered self-checks and SVG plots.

mod config;
mod convergence;
mod experiment;
mod plot;
mod reference;
mod verify;

pub use config::KeyValueConfig;
pub use convergence::{convergence_study, write_convergence_csv, ConvergenceRow, ConvergenceSolver, ExactSolution};
pub use experiment::{
    fingerprint, run_cell, run_experiment, write_rows_csv, CellRun, ExperimentSpec, MeshContext, Method, ResultRow,
};
pub use plot::{table_plots, LineChart, Series};
pub use reference::{compare_to_reference, format_diff_table, reference_rows, DiffRow, ReferenceRow, ITERATION_BAND, KAPPA_BAND};
pub use verify::{verify, Check, VerifyLevel, VerifyReport};
