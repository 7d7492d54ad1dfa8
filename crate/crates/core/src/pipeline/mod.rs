//! CI/CD runner: deterministic check stages over a repository snapshot, a
//! reproducible package, and the on-chain build and deploy records.

pub mod config;
pub mod package;
pub mod runner;

pub use config::{run_stage, CheckRule, Failure, PackageSpec, PipelineConfig, RuleKind, Stage, StageResult, StageSpec, CONFIG_FILE};
pub use package::{encode_package, extract_package, make_package};
pub use runner::{deployed_file_name, execute_deploy, run_pipeline, time_and_date, CiContext, DeployOutcome, PipelineError, PipelineRun, RepoWatcher};
