//! Experiment configs, presets, domain-of-attraction scans, invariant
//! checks and report writers.

pub mod check;
pub mod config;
pub mod doa;
pub mod experiment;
pub mod presets;
pub mod table;
pub mod xyz;

pub use check::{run_checks, CheckResult};
pub use config::{
    relax, ExperimentConfig, Format, GridSpec, MethodKind, NewtonConfig, OutputSpec, ProblemSpec, ReferenceMode,
    StartSpec, VariantSpec,
};
pub use doa::{classify, doa_scan, run_doa, write_doa_report, DoaConfig, DoaGrid, DoaMethod, DoaReport};
pub use experiment::{run_experiment, write_report, ExperimentReport, RunSummary, MATCH_TOL};
pub use presets::Preset;
pub use table::{emit_table, parse_table_json, ErrorColumn};
pub use xyz::write_xyz;
