//! Config-driven studies: convergence to the continuum limit, depth-scaling
//! sweeps with degeneracy classification, and per-architecture checks.

mod compare;
mod config;
mod report;
mod studies;

pub use compare::run_compare;
pub use config::{
    ArchitectureConfig, CompareConfig, Controls, ExperimentConfig, GeneratorConfig, InputConfig, Study,
    SweepConfig, Thresholds, SCHEMA_VERSION,
};
pub use report::{
    Classification, ConfigEcho, Degeneracy, ExperimentReport, FitRecord, NamedProfile, Role, RunRecord,
};
pub use studies::{
    memory_length, run_convergence, run_dilated_erf, run_leak_split, run_multichannel_xavier,
    run_recurrent_memory, run_scaling_sweep, run_study, RunOptions,
};
