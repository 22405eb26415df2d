//! Named experiments: configuration, orchestration and run manifests.

mod config;
mod manifest;
mod runs;

pub use config::{
    parse_config, AnalysisConfig, EvolutionParams, ExperimentConfig, ExperimentKind, FrequencyConfig, GridConfig,
    InitialConfig, ModelConfig, PotentialConfig, MAX_EPSILON, MIN_HALF_WIDTH,
};
pub use manifest::{code_version, CriterionResult, RunManifest};
pub use runs::{list_experiments, read_manifest, run_experiment, shooting_rho2, FAILURE_MARKER, MANIFEST_FILE};
