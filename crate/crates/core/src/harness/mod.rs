//! Configuration, experiment presets, seeded execution and replay.

mod config;
mod presets;
mod replay;
mod run;

pub use config::{OracleSettings, PhiSpec, RunConfig, StepSize};
pub use presets::{
    large_scale_max_agents, preset_large_scale, preset_small_scale, DEFAULT_RUNS, LARGE_SCALE_T,
    PRESET_MEANS, SMALL_SCALE_T,
};
pub use replay::{replay, replay_all, ReplayReport};
pub use run::{
    compute_baselines, format_slot_row, mean_std, run, run_with, simulate_run, slots_header,
    summary_csv, summary_header, trajectory_csv, write_output, OracleReport, RunOptions, RunOutput,
    RunSummary, Trajectory, CONFIG_FILE, METADATA_FILE, SLOTS_FILE, SUMMARY_COLUMNS, SUMMARY_FILE,
    TRAJECTORY_FILE,
};
