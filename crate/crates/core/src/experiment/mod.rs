//! Experiment harness: configuration, seeded trials comparing the network
//! with its Hermite equivalent, sweeps over one configuration field, runs on
//! external two-class data, and table output.

mod config;
mod external;
mod run;
mod sweep;
mod trial;

pub use config::{beta_in_window, degree_for_beta, ExperimentConfig, TargetDescriptor, TargetKind};
pub use external::{run_external, run_external_trial, ExternalPool, PREPROCESS_NOISE};
pub use run::{run_experiment, RunReport, TrialOutcome};
pub use sweep::{
    emit, run_sweep, sweep_configs, thread_pool_from_env, OutputFormat, SweepAxis, SweepMetadata,
    SweepRecord, SweepTable, TrialCell, TrialFailure, METRICS,
};
pub use trial::{
    run_trial, streams, synthetic_trial_data, train_and_evaluate, TrialData, TrialDiagnostics,
    TrialResult,
};
