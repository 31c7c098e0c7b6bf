//! Benchmark case configurations, forward runs and gradient-descent drivers.

mod config;
mod optimize;
pub mod presets;
mod run;

pub use config::{
    CaseConfig, Duration, InitialCondition, MeshSpec, OptimizationSpec, Parameter, ParameterSpec, SolverSettings, SourceSpec, StatsPlan,
    StepSize, TimeControl,
};
pub use optimize::{
    ablation_csv, ablation_table, backward_timing, optimize, path_ablation, AblationRun, AblationSetting, OptimizationTrace, Problem,
};
pub use run::{
    cfl_dt, initial_velocity, poiseuille_analytic, poiseuille_peak_error, poiseuille_profile_error, run_case, run_case_from, run_case_with,
    CaseOutput,
};
