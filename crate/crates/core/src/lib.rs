//! Iterative text-to-CAD orchestration.
//!
//! A natural-language query is turned into a CAD macro by an LLM, the macro is
//! executed, the render is scored against the query, and the result is refined
//! in two nested loops: error refinement (fix macros that do not execute) and
//! model refinement (fix executable macros whose render does not match).
//!
//! The crate is organised by stage:
//!
//! - [`executor`]: macro execution (headless FreeCAD or the hermetic mock dialect)
//! - [`llm`]: prompt templates, providers, and response parsing
//! - [`scorer`]: alignment scoring and captioning
//! - [`feedback`]: human caption overrides and verdicts
//! - [`store`]: append-only run event logs
//! - [`pipeline`]: the refinement state machine
//! - [`bench`]: dataset loading and success@k metrics
//! - [`api`]: HTTP surface

pub mod api;
pub mod bench;
pub mod executor;
pub mod feedback;
pub mod llm;
pub mod pipeline;
pub mod scorer;
pub mod store;

pub use executor::{ExecutionResult, Executor, MacroDocument, RenderArtifact, SceneDescriptor};
pub use pipeline::{run_query, Action, FailureKind, PipelineConfig, RunRecord, RunStatus};
