//! Headless FreeCAD backend.
//!
//! The user macro is wrapped between a prologue that brings up an offscreen
//! GUI and runs the user code with tracebacks routed to stderr, and an
//! epilogue that sets the isometric view and saves `render.png` into the
//! working directory.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{Dialect, ErrorClass, ExecutionResult, Executor, MacroDocument, RenderArtifact};

pub const EPILOGUE_VERSION: u32 = 1;
pub const RENDER_FILE: &str = "render.png";
pub const MACRO_FILE: &str = "macro.FCMacro";

const PROLOGUE: &str = include_str!("../../assets/freecad/prologue_v1.py");
const EPILOGUE: &str = include_str!("../../assets/freecad/epilogue_v1.py");

/// A ready-to-spawn process invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct Invocation {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub env: Vec<(String, String)>,
    pub macro_path: PathBuf,
    pub render_path: PathBuf,
}

fn py_string(s: &str) -> String {
    // A JSON string literal is also a valid Python string literal.
    serde_json::to_string(s).expect("string serialises")
}

/// Full text of the wrapped macro file.
pub fn wrap_macro(user_source: &str, render_path: &Path) -> String {
    let prologue = PROLOGUE.replace("@USER_SOURCE@", &py_string(user_source));
    let epilogue = EPILOGUE.replace(
        "@RENDER_PATH@",
        &py_string(&render_path.display().to_string()),
    );
    format!("{prologue}\n{epilogue}")
}

/// Writes the wrapped macro into `workdir` and returns the command that runs it.
pub fn build_freecad_invocation(
    binary: &Path,
    macro_doc: &MacroDocument,
    workdir: &Path,
) -> std::io::Result<Invocation> {
    let macro_path = workdir.join(MACRO_FILE);
    let render_path = workdir.join(RENDER_FILE);
    std::fs::write(&macro_path, wrap_macro(&macro_doc.text, &render_path))?;
    Ok(Invocation {
        program: binary.to_path_buf(),
        args: vec![macro_path.display().to_string()],
        env: vec![("QT_QPA_PLATFORM".into(), "offscreen".into())],
        macro_path,
        render_path,
    })
}

#[derive(Debug, Clone)]
pub struct FreecadExecutor {
    pub binary: PathBuf,
}

impl FreecadExecutor {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        Self {
            binary: binary.into(),
        }
    }
}

impl Default for FreecadExecutor {
    fn default() -> Self {
        Self::new("freecad")
    }
}

impl Executor for FreecadExecutor {
    fn dialect(&self) -> Dialect {
        Dialect::FreecadPython
    }

    fn execute(
        &self,
        macro_doc: &MacroDocument,
        workdir: &Path,
        timeout: Duration,
    ) -> (ExecutionResult, Option<RenderArtifact>) {
        let start = Instant::now();
        let fail = |class, msg: String| (ExecutionResult::error(class, msg, start.elapsed()), None);

        if macro_doc.dialect != Dialect::FreecadPython {
            return fail(
                ErrorClass::Launch,
                "freecad executor cannot run a mock-dialect macro".into(),
            );
        }
        let inv = match build_freecad_invocation(&self.binary, macro_doc, workdir) {
            Ok(inv) => inv,
            Err(e) => {
                return fail(
                    ErrorClass::Launch,
                    format!("cannot write macro into {}: {e}", workdir.display()),
                )
            }
        };
        let _ = std::fs::remove_file(&inv.render_path);

        let mut child = match Command::new(&inv.program)
            .args(&inv.args)
            .envs(inv.env.iter().map(|(k, v)| (k, v)))
            .current_dir(workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
        {
            Ok(c) => c,
            Err(e) => {
                return fail(
                    ErrorClass::Launch,
                    format!("cannot launch {}: {e}", inv.program.display()),
                )
            }
        };

        let stdout = drain(child.stdout.take());
        let stderr = drain(child.stderr.take());

        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if start.elapsed() >= timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => thread::sleep(Duration::from_millis(20)),
                Err(e) => {
                    let _ = child.kill();
                    return fail(ErrorClass::Launch, format!("wait failed: {e}"));
                }
            }
        };
        let stdout = stdout.join().unwrap_or_default();
        let stderr = stderr.join().unwrap_or_default();

        let Some(status) = status else {
            return fail(
                ErrorClass::Timeout,
                format!("macro exceeded the {}s time limit", timeout.as_secs_f64()),
            );
        };
        if !status.success() {
            let detail = if stderr.trim().is_empty() {
                stdout
            } else {
                stderr
            };
            return fail(ErrorClass::Runtime, detail.trim().to_string());
        }
        if !inv.render_path.is_file() {
            let mut msg = format!(
                "render capture failed: {} was not written",
                inv.render_path.display()
            );
            if !stderr.trim().is_empty() {
                msg.push('\n');
                msg.push_str(stderr.trim());
            }
            return fail(ErrorClass::Runtime, msg);
        }
        (
            ExecutionResult::ok(start.elapsed()),
            Some(RenderArtifact::png(&inv.render_path)),
        )
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<String> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_end(&mut buf);
        }
        String::from_utf8_lossy(&buf).into_owned()
    })
}
