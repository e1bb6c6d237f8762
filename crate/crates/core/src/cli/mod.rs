//! Configuration loading and experiment orchestration for the command line
//! front end.

mod config;
mod run;

pub use config::{
    build_model, build_system, load_config, parse_config, validate, ConfigError, Experiment, ExperimentConfig,
    FieldError, InlineSystem, MapSpec, PotentialSpec, SystemSpec, CAP_PARAMS, DEFAULT_POINT_CAP,
};
pub use run::{run, run_to_dir, Artifacts, OUTPUT_FORMAT, SUMMARY_FILE, VERSION};
