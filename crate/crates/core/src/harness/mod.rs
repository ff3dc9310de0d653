//! Configuration-driven pipeline: truth ensembles, OU fitting, AMRS and MZ
//! model construction, reduced simulations and comparison reports.

pub mod pipeline;
pub mod report;
pub mod spec;

pub use pipeline::{run_experiment, Experiment, FittedOu, ReducedRun, Stage, TruthStats};
pub use report::{compare, ComparisonReport, ReportColumn, MASK_FACTOR};
pub use spec::ExperimentSpec;
