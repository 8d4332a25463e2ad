//! Python bindings. Records, events and reports cross the boundary as plain
//! dicts and lists (via JSON), so they match the HTTP API shapes.

use std::path::PathBuf;
use std::sync::Arc;

use cadrefine::api::merge_config;
use cadrefine::bench::{self, DatasetItem, MetricsReport, RunRow};
use cadrefine::executor::{mock_eval as eval_scene, mock_parse, SceneDescriptor};
use cadrefine::feedback::record_verdict;
use cadrefine::llm::ScriptBook;
use cadrefine::pipeline::{build_deps, Backends, PipelineConfig, RunStatus};
use cadrefine::store::{list_runs, load_run, EventStore, FileStore, MemoryStore};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(cadrefine, CadrefineError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    CadrefineError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, value: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Run configuration. Keyword arguments override the defaults; unknown keys
/// raise `ValueError`.
#[pyclass(name = "Config", module = "cadrefine", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Config {
    inner: PipelineConfig,
}

#[pymethods]
impl Config {
    #[new]
    #[pyo3(signature = (**overrides))]
    fn new(overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Self::from_base(&PipelineConfig::default(), overrides)
    }

    /// Mock executor, mock prompts, replay LLM.
    #[staticmethod]
    fn mock(script: PathBuf, script_name: &str) -> Self {
        Self {
            inner: PipelineConfig::mock(script, script_name),
        }
    }

    #[pyo3(signature = (**overrides))]
    fn replace(&self, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        Self::from_base(&self.inner, overrides)
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    #[getter]
    fn error_iter(&self) -> u32 {
        self.inner.error_iter
    }

    #[getter]
    fn model_iter(&self) -> u32 {
        self.inner.model_iter
    }

    /// Upper bound on logical LLM calls in one run.
    fn llm_call_budget(&self) -> u64 {
        self.inner.llm_call_budget()
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Config(threshold={}, error_iter={}, model_iter={}, executor_kind={:?})",
            self.inner.threshold,
            self.inner.error_iter,
            self.inner.model_iter,
            self.inner.executor_kind
        )
    }
}

impl Config {
    fn from_base(base: &PipelineConfig, overrides: Option<&Bound<'_, PyDict>>) -> PyResult<Self> {
        let value: Option<serde_json::Value> = match overrides {
            Some(d) if !d.is_empty() => Some(from_py(d.as_any())?),
            _ => None,
        };
        let inner = merge_config(base, value.as_ref()).map_err(PyValueError::new_err)?;
        Ok(Self { inner })
    }
}

/// An event store, either a directory on disk or in memory.
#[pyclass(name = "Store", module = "cadrefine", frozen, skip_from_py_object)]
pub struct Store {
    inner: Arc<dyn EventStore>,
}

#[pymethods]
impl Store {
    #[staticmethod]
    fn open(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(FileStore::open(path).map_err(err)?),
        })
    }

    #[staticmethod]
    fn memory() -> Self {
        Self {
            inner: Arc::new(MemoryStore::new()),
        }
    }

    fn run_ids(&self) -> PyResult<Vec<String>> {
        self.inner.run_ids().map_err(err)
    }

    fn events<'py>(&self, py: Python<'py>, run_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.events(run_id).map_err(err)?)
    }

    /// The run record rebuilt from its event log.
    fn load_run<'py>(&self, py: Python<'py>, run_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &load_run(self.inner.as_ref(), run_id).map_err(err)?)
    }

    #[pyo3(signature = (status=None))]
    fn list_runs<'py>(
        &self,
        py: Python<'py>,
        status: Option<&Bound<'py, PyAny>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let status: Option<RunStatus> = status.map(from_py).transpose()?;
        to_py(py, &list_runs(self.inner.as_ref(), status).map_err(err)?)
    }

    fn read_artifact<'py>(
        &self,
        py: Python<'py>,
        run_id: &str,
        name: &str,
    ) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = self.inner.read_artifact(run_id, name).map_err(err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    /// Appends a human verdict to a finished run.
    fn record_verdict<'py>(
        &self,
        py: Python<'py>,
        run_id: &str,
        success: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        to_py(
            py,
            &record_verdict(self.inner.as_ref(), run_id, success).map_err(err)?,
        )
    }
}

/// Runs a query to a terminal record. `expected_scene` feeds the stub scorer;
/// `scorer_url` selects a sidecar instead.
#[pyfunction]
#[pyo3(signature = (query, config, store, expected_scene=None, scorer_url=None))]
fn run_query<'py>(
    py: Python<'py>,
    query: &str,
    config: PyRef<'py, Config>,
    store: PyRef<'py, Store>,
    expected_scene: Option<&Bound<'py, PyAny>>,
    scorer_url: Option<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let backends = Backends {
        expected_scene: expected_scene.map(from_py::<SceneDescriptor>).transpose()?,
        scorer_url,
        ..Backends::default()
    };
    let config = config.inner.clone();
    let store = store.inner.clone();
    let record = py.detach(move || {
        let deps = build_deps(&config, &backends)?;
        cadrefine::run_query(query, &config, &deps.borrow(store.as_ref(), None))
            .map_err(|e| e.to_string())
    });
    to_py(py, &record.map_err(CadrefineError::new_err)?)
}

/// Evaluates a mock-dialect macro to its scene descriptor.
#[pyfunction]
fn mock_eval<'py>(py: Python<'py>, source: &str) -> PyResult<Bound<'py, PyAny>> {
    let program = mock_parse(source).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(
        py,
        &eval_scene(&program).map_err(|e| PyValueError::new_err(e.to_string()))?,
    )
}

#[pyfunction]
fn stub_score(actual: &Bound<'_, PyAny>, expected: &Bound<'_, PyAny>) -> PyResult<f64> {
    let a: SceneDescriptor = from_py(actual)?;
    let b: SceneDescriptor = from_py(expected)?;
    Ok(cadrefine::scorer::stub_score(
        &a.canonicalize(),
        &b.canonicalize(),
    ))
}

#[pyfunction]
fn vqa_question(query: &str) -> PyResult<String> {
    cadrefine::scorer::vqa_question(query).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn stopping_criterion(score: f64, threshold: f64) -> bool {
    cadrefine::pipeline::stopping_criterion(score, threshold)
}

#[pyfunction]
fn parse_dataset<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    to_py(
        py,
        &bench::parse_dataset(text).map_err(|e| PyValueError::new_err(e.to_string()))?,
    )
}

fn report_from(rows: &Bound<'_, PyAny>, k_max: usize) -> PyResult<MetricsReport> {
    let rows: Vec<RunRow> = from_py(rows)?;
    for r in &rows {
        r.validate()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
    }
    MetricsReport::from_rows(&rows, k_max).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// success@k, per-difficulty rates, failure breakdown and deltas for result rows.
#[pyfunction]
#[pyo3(signature = (rows, k_max=0))]
fn metrics<'py>(
    py: Python<'py>,
    rows: &Bound<'py, PyAny>,
    k_max: usize,
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &report_from(rows, k_max)?)
}

#[pyfunction]
#[pyo3(signature = (rows, k_max=0))]
fn render_markdown(rows: &Bound<'_, PyAny>, k_max: usize) -> PyResult<String> {
    Ok(bench::render_markdown(&report_from(rows, k_max)?))
}

/// Runs dataset items hermetically (replay LLM, mock executor, stub scorer)
/// and returns one result row per finished run.
#[pyfunction]
#[pyo3(signature = (items, script, store, config=None, jobs=1))]
fn execute_dataset<'py>(
    py: Python<'py>,
    items: &Bound<'py, PyAny>,
    script: PathBuf,
    store: PyRef<'py, Store>,
    config: Option<PyRef<'py, Config>>,
    jobs: usize,
) -> PyResult<Bound<'py, PyAny>> {
    let items: Vec<DatasetItem> = from_py(items)?;
    let book = Arc::new(ScriptBook::load(&script).map_err(err)?);
    let config = config
        .map(|c| c.inner.clone())
        .unwrap_or_else(|| PipelineConfig::mock(&script, "default"));
    let store = store.inner.clone();
    let rows: Vec<RunRow> = py.detach(move || {
        let factory = bench::hermetic_deps(book);
        bench::execute_dataset(&items, &config, store.as_ref(), jobs, &factory)
            .iter()
            .filter_map(|o| o.row())
            .collect()
    });
    to_py(py, &rows)
}

#[pymodule]
#[pyo3(name = "cadrefine")]
pub fn cadrefine_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("CadrefineError", m.py().get_type::<CadrefineError>())?;
    m.add_class::<Config>()?;
    m.add_class::<Store>()?;
    m.add_function(wrap_pyfunction!(run_query, m)?)?;
    m.add_function(wrap_pyfunction!(mock_eval, m)?)?;
    m.add_function(wrap_pyfunction!(stub_score, m)?)?;
    m.add_function(wrap_pyfunction!(vqa_question, m)?)?;
    m.add_function(wrap_pyfunction!(stopping_criterion, m)?)?;
    m.add_function(wrap_pyfunction!(parse_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(render_markdown, m)?)?;
    m.add_function(wrap_pyfunction!(execute_dataset, m)?)?;
    Ok(())
}
