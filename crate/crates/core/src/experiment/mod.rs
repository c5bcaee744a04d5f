//! Experiment harness: configuration, synthetic models and data, inversion
//! runs and gradient checks.

pub mod config;
pub mod gradcheck;
pub mod run;
pub mod synth;

pub use config::{ExperimentConfig, GeometrySpec, ModelSpec, NoiseSpec, RegularizerSpec, StartSpec, TransformSpec};
pub use gradcheck::{gradient_check_suite, GradCheckCase};
pub use run::{build_problem, convergence_csv, model_rmse, run_experiment, RunArtifacts, RunOptions, RunSummary, CSV_HEADER};
pub use synth::{gaussian_blur, synth_data, synth_data_detailed, synth_model, SynthData};
