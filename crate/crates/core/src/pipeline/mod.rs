//! The generate → execute → score → refine loop.

mod config;
mod machine;
mod record;
mod run;
mod wiring;

pub use config::{ExecutorKind, PipelineConfig};
pub use machine::{
    classify_failure, next_action, stopping_criterion, Action, ContractViolation, Outcome,
};
pub use record::{Attempt, FailureKind, RunRecord, RunStatus, Verdict};
pub use run::{new_run_id, run_query, Deps, PipelineError, RunSession};
pub use wiring::{build_deps, Backends, OwnedDeps};
