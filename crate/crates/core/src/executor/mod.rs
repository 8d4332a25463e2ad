//! Macro execution backends.
//!
//! [`FreecadExecutor`] runs real FreeCAD Python macros headlessly and
//! captures an isometric PNG. [`MockExecutor`] interprets the small mock
//! dialect into a [`SceneDescriptor`], which stands in for the render in
//! hermetic runs.

pub mod dialect;
pub mod freecad;
pub mod scene;

use std::path::Path;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use dialect::{parse as mock_parse, pretty_print, Command, ParseError, Program};
pub use freecad::{build_freecad_invocation, FreecadExecutor, Invocation, RENDER_FILE};
pub use scene::{evaluate as mock_eval, Aabb, EvalError, Primitive, SceneDescriptor, Shape};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dialect {
    FreecadPython,
    Mock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroDocument {
    pub text: String,
    pub dialect: Dialect,
    pub version_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Ok,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    Parse,
    Runtime,
    Launch,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_class: Option<ErrorClass>,
    /// Wall-clock seconds.
    pub duration: f64,
}

impl ExecutionResult {
    pub fn ok(duration: Duration) -> Self {
        Self {
            outcome: Outcome::Ok,
            error_message: None,
            error_class: None,
            duration: duration.as_secs_f64(),
        }
    }

    pub fn error(class: ErrorClass, message: impl Into<String>, duration: Duration) -> Self {
        let mut message = message.into();
        if message.trim().is_empty() {
            message = format!("{class:?} error with no diagnostic output").to_lowercase();
        }
        Self {
            outcome: Outcome::Error,
            error_message: Some(message),
            error_class: Some(class),
            duration: duration.as_secs_f64(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.outcome == Outcome::Ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderKind {
    Png,
    Descriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderArtifact {
    pub kind: RenderKind,
    /// File path for PNG renders, content hash for descriptors.
    pub path_or_hash: String,
    pub view: String,
    /// Inline scene for descriptor renders.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneDescriptor>,
}

pub const ISOMETRIC: &str = "isometric";

impl RenderArtifact {
    pub fn png(path: &Path) -> Self {
        Self {
            kind: RenderKind::Png,
            path_or_hash: path.display().to_string(),
            view: ISOMETRIC.into(),
            scene: None,
        }
    }

    pub fn descriptor(scene: SceneDescriptor) -> Self {
        let json = serde_json::to_vec(&scene).expect("scene serialises");
        Self {
            kind: RenderKind::Descriptor,
            path_or_hash: format!("sha256:{}", hex::encode(Sha256::digest(&json))),
            view: ISOMETRIC.into(),
            scene: Some(scene),
        }
    }
}

/// A macro execution backend. Errors are reported in the result, never as
/// a Rust error, so they can be fed back to the LLM.
pub trait Executor: Send + Sync {
    fn dialect(&self) -> Dialect;

    fn execute(
        &self,
        macro_doc: &MacroDocument,
        workdir: &Path,
        timeout: Duration,
    ) -> (ExecutionResult, Option<RenderArtifact>);
}

/// Interprets the mock dialect in-process.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockExecutor;

impl Executor for MockExecutor {
    fn dialect(&self) -> Dialect {
        Dialect::Mock
    }

    fn execute(
        &self,
        macro_doc: &MacroDocument,
        _workdir: &Path,
        _timeout: Duration,
    ) -> (ExecutionResult, Option<RenderArtifact>) {
        let start = Instant::now();
        if macro_doc.dialect != Dialect::Mock {
            return (
                ExecutionResult::error(
                    ErrorClass::Launch,
                    "mock executor cannot run a freecad_python macro",
                    start.elapsed(),
                ),
                None,
            );
        }
        let program = match mock_parse(&macro_doc.text) {
            Ok(p) => p,
            Err(e) => {
                return (
                    ExecutionResult::error(ErrorClass::Parse, e.to_string(), start.elapsed()),
                    None,
                )
            }
        };
        match mock_eval(&program) {
            Ok(scene) => (
                ExecutionResult::ok(start.elapsed()),
                Some(RenderArtifact::descriptor(scene)),
            ),
            Err(e) => (
                ExecutionResult::error(ErrorClass::Runtime, e.to_string(), start.elapsed()),
                None,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> (ExecutionResult, Option<RenderArtifact>) {
        let doc = MacroDocument {
            text: text.into(),
            dialect: Dialect::Mock,
            version_index: 0,
        };
        MockExecutor.execute(&doc, Path::new("."), DEFAULT_TIMEOUT)
    }

    #[test]
    fn box_executes() {
        let (res, render) = run("box b1 10 10 10");
        assert!(res.is_ok());
        let render = render.unwrap();
        assert_eq!(render.kind, RenderKind::Descriptor);
        assert_eq!(render.view, "isometric");
        let scene = render.scene.unwrap();
        assert_eq!(scene.bbox.max, [10.0; 3]);
        assert_eq!(scene.total_volume, 1000.0);
    }

    #[test]
    fn negative_sphere_is_parse_error() {
        let (res, render) = run("sphere s1 -8");
        assert!(render.is_none());
        assert_eq!(res.error_class, Some(ErrorClass::Parse));
        assert!(res
            .error_message
            .unwrap()
            .contains("radius must be positive"));
    }

    #[test]
    fn empty_macro() {
        let (res, _) = run("");
        assert_eq!(res.error_class, Some(ErrorClass::Parse));
        assert!(res.error_message.unwrap().ends_with("empty macro"));
    }

    #[test]
    fn overflow_is_runtime() {
        let (res, _) = run("box a 1e200 1e200 1e200");
        assert_eq!(res.error_class, Some(ErrorClass::Runtime));
    }

    #[test]
    fn descriptor_hash_is_content_addressed() {
        let a = run("box a 1 2 3\nsphere s 1").1.unwrap();
        let b = run("sphere t 1\nbox c 1 2 3").1.unwrap();
        assert_eq!(a.path_or_hash, b.path_or_hash);
    }

    #[test]
    fn wrong_dialect_is_launch_error() {
        let doc = MacroDocument {
            text: "import FreeCAD".into(),
            dialect: Dialect::FreecadPython,
            version_index: 0,
        };
        let (res, _) = MockExecutor.execute(&doc, Path::new("."), DEFAULT_TIMEOUT);
        assert_eq!(res.error_class, Some(ErrorClass::Launch));
    }
}
