//! Python bindings: specs, execution, visualizers, KLM and the fixture engines.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use searchsvc_core::codec;
use searchsvc_core::engine::{DetectOptions, FetchConfig, HttpFetcher, JsonApiProvider};
use searchsvc_core::klm::{self, KlmScenario, OperatorTable, Seconds};
use searchsvc_core::selector::{suggest_selectors as suggest, RankingPolicy};
use searchsvc_core::visualize::{RenderOptions, VisualizerRegistry};
use searchsvc_core::{validate_spec, DocumentHandle, NodePath, SearchQuery};
use searchsvc_fixtures::specs as fixture_specs;

create_exception!(searchsvc, SearchServiceError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    SearchServiceError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "ServiceSpec", module = "searchsvc", from_py_object)]
#[derive(Clone)]
pub struct PyServiceSpec {
    inner: searchsvc_core::ServiceSpec,
}

#[pymethods]
impl PyServiceSpec {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        codec::deserialize(text).map(|inner| Self { inner }).map_err(err)
    }

    /// Canonical JSON text.
    fn to_json(&self) -> String {
        codec::serialize(&self.inner)
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn strategy(&self) -> Option<&'static str> {
        self.inner.strategy.as_ref().map(|s| s.variant.name())
    }

    fn property_names(&self) -> Vec<String> {
        self.inner
            .result_spec
            .property_names()
            .map(str::to_string)
            .collect()
    }

    /// Issues as "severity: path: message" lines.
    fn validate(&self) -> Vec<String> {
        let report = validate_spec(&self.inner);
        report
            .summary()
            .lines()
            .map(str::to_string)
            .collect()
    }

    fn is_valid(&self) -> bool {
        validate_spec(&self.inner).is_valid()
    }

    fn __repr__(&self) -> String {
        format!("ServiceSpec(id={:?}, name={:?})", self.inner.id, self.inner.name)
    }
}

#[pyclass(name = "ResultSet", module = "searchsvc")]
pub struct PyResultSet {
    inner: searchsvc_core::ResultSet,
}

#[pymethods]
impl PyResultSet {
    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&self.inner).map_err(err)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    /// Values of `property` per item; `None` where missing.
    fn values(&self, property: &str) -> Vec<Option<String>> {
        self.inner
            .items
            .iter()
            .map(|o| o.value(property).map(str::to_string))
            .collect()
    }

    fn target_urls(&self) -> Vec<String> {
        self.inner.items.iter().map(|o| o.target_url.clone()).collect()
    }

    #[getter]
    fn page_index(&self) -> u32 {
        self.inner.page.page_index
    }

    #[getter]
    fn has_next(&self) -> bool {
        self.inner.page.has_next
    }

    #[getter]
    fn diagnostics(&self) -> Vec<String> {
        self.inner.diagnostics.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.items.len()
    }
}

/// Executes services over HTTP with its own async runtime.
#[pyclass(name = "Engine", module = "searchsvc")]
pub struct PyEngine {
    engine: searchsvc_core::Engine,
    fetcher: Arc<HttpFetcher>,
    runtime: tokio::runtime::Runtime,
}

#[pymethods]
impl PyEngine {
    /// `polite=False` disables per-host request spacing.
    #[new]
    #[pyo3(signature = (polite = true))]
    fn new(polite: bool) -> PyResult<Self> {
        let config = if polite {
            FetchConfig::default()
        } else {
            FetchConfig::local()
        };
        Ok(Self {
            engine: searchsvc_core::Engine::new(),
            fetcher: HttpFetcher::shared(config).map_err(err)?,
            runtime: tokio::runtime::Runtime::new().map_err(err)?,
        })
    }

    /// Registers a JSON API provider; `fields` maps property names to JSON fields.
    fn register_json_provider(
        &self,
        provider_id: &str,
        endpoint: &str,
        target_field: &str,
        fields: Vec<(String, String)>,
    ) -> PyResult<()> {
        let endpoint = url::Url::parse(endpoint).map_err(err)?;
        let fields: Vec<(&str, &str)> = fields.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        self.engine
            .register_provider(
                provider_id,
                Arc::new(JsonApiProvider::new(endpoint, target_field, &fields)),
            )
            .map_err(err)
    }

    #[pyo3(signature = (spec, keywords, filters = None, ordering = None, page = 1, enrich = false))]
    fn search(
        &self,
        spec: &PyServiceSpec,
        keywords: &str,
        filters: Option<Vec<String>>,
        ordering: Option<String>,
        page: u32,
        enrich: bool,
    ) -> PyResult<PyResultSet> {
        let query = SearchQuery {
            keywords: keywords.to_string(),
            active_filters: filters.unwrap_or_default(),
            active_ordering: ordering,
            page,
        };
        let spec = &spec.inner;
        let fetcher = self.fetcher.as_ref();
        let inner = self.runtime.block_on(async {
            let (mut rs, _) = self.engine.execute(spec, &query, fetcher).await.map_err(err)?;
            if enrich {
                let e = searchsvc_core::extract::enrich_in_target(rs.items, &spec.result_spec, fetcher)
                    .await
                    .map_err(err)?;
                rs.items = e.objects;
                rs.diagnostics
                    .extend(e.failures.iter().map(|f| format!("{}: {}", f.target_url, f.reason)));
            }
            Ok::<_, PyErr>(rs)
        })?;
        Ok(PyResultSet { inner })
    }

    /// Returns a copy of `spec` with the detected strategy filled in.
    fn detect_strategy(&self, spec: &PyServiceSpec, probe_a: &str, probe_b: &str) -> PyResult<PyServiceSpec> {
        let strategy = self
            .runtime
            .block_on(self.engine.detect_strategy(
                &spec.inner,
                (probe_a, probe_b),
                self.fetcher.as_ref(),
                &DetectOptions::default(),
            ))
            .map_err(err)?;
        let mut inner = spec.inner.clone();
        inner.strategy = Some(strategy);
        Ok(PyServiceSpec { inner })
    }
}

/// The local fixture engines, running until `stop()` or garbage collection.
#[pyclass(name = "FixtureServer", module = "searchsvc")]
pub struct PyFixtureServer {
    server: std::sync::Mutex<Option<searchsvc_fixtures::FixtureServer>>,
    base_url: url::Url,
}

impl PyFixtureServer {
    fn with<T>(&self, f: impl FnOnce(&searchsvc_fixtures::FixtureServer) -> T) -> PyResult<T> {
        let guard = self.server.lock().map_err(err)?;
        guard.as_ref().map(f).ok_or_else(|| err("the fixture server is stopped"))
    }
}

#[pymethods]
impl PyFixtureServer {
    #[new]
    #[pyo3(signature = (port = 0))]
    fn new(port: u16) -> PyResult<Self> {
        let server = searchsvc_fixtures::spawn_background(port).map_err(err)?;
        Ok(Self {
            base_url: server.base_url(),
            server: std::sync::Mutex::new(Some(server)),
        })
    }

    #[getter]
    fn base_url(&self) -> String {
        self.base_url.to_string()
    }

    fn force_missing(&self, book_id: u32) -> PyResult<()> {
        self.with(|s| s.state().force_missing(book_id))
    }

    fn clear_missing(&self) -> PyResult<()> {
        self.with(|s| s.state().clear_missing())
    }

    /// Ready-to-run services for this server.
    fn installed_specs(&self) -> Vec<PyServiceSpec> {
        fixture_specs::installed(&self.base_url)
            .into_iter()
            .map(|inner| PyServiceSpec { inner })
            .collect()
    }

    /// A service without strategy for `mode`: form, ajax, keystroke or scroll.
    fn draft_spec(&self, mode: &str) -> PyResult<PyServiceSpec> {
        let mode = match mode {
            "form" => fixture_specs::EngineMode::FormReload,
            "ajax" => fixture_specs::EngineMode::AjaxFragment,
            "keystroke" => fixture_specs::EngineMode::KeystrokeAjax,
            "scroll" => fixture_specs::EngineMode::InfiniteScroll,
            other => return Err(err(format!("unknown fixture mode {other:?}"))),
        };
        Ok(PyServiceSpec {
            inner: fixture_specs::draft(&self.base_url, mode),
        })
    }

    /// Registers the provider behind the JSON API service on `engine`.
    fn register_provider(&self, engine: &PyEngine) -> PyResult<()> {
        engine
            .engine
            .register_provider(fixture_specs::PROVIDER_ID, fixture_specs::json_provider(&self.base_url))
            .map_err(err)
    }

    fn stop(&self) -> PyResult<()> {
        self.server.lock().map_err(err)?.take();
        Ok(())
    }
}

/// Brute-force matches over the fixture dataset, as target paths.
#[pyfunction]
#[pyo3(signature = (keywords, venue = None, sort = None))]
fn ground_truth(keywords: &str, venue: Option<&str>, sort: Option<&str>) -> PyResult<Vec<String>> {
    let venue = venue
        .map(|v| searchsvc_fixtures::VenueKind::parse(v).ok_or_else(|| err(format!("unknown venue {v:?}"))))
        .transpose()?;
    let sort = sort
        .map(|s| searchsvc_fixtures::SortKey::parse(s).ok_or_else(|| err(format!("unknown sort {s:?}"))))
        .transpose()?;
    Ok(searchsvc_fixtures::ground_truth(keywords, venue, sort)
        .iter()
        .map(|b| b.path())
        .collect())
}

fn operator_table(operators: Option<BTreeMap<String, f64>>) -> PyResult<OperatorTable> {
    let mut table = OperatorTable::default();
    for (symbol, seconds) in operators.unwrap_or_default() {
        table = table
            .with(&symbol, Seconds::from_decimal(seconds).map_err(err)?)
            .map_err(err)?;
    }
    Ok(table)
}

/// Total seconds of a scenario given as JSON text.
#[pyfunction]
#[pyo3(signature = (scenario_json, operators = None))]
fn klm_estimate(scenario_json: &str, operators: Option<BTreeMap<String, f64>>) -> PyResult<f64> {
    let scenario = KlmScenario::from_json(scenario_json).map_err(err)?;
    klm::estimate(&scenario, &operator_table(operators)?)
        .map(Seconds::as_f64)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (a_json, b_json, operators = None))]
fn klm_compare<'py>(
    py: Python<'py>,
    a_json: &str,
    b_json: &str,
    operators: Option<BTreeMap<String, f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let a = KlmScenario::from_json(a_json).map_err(err)?;
    let b = KlmScenario::from_json(b_json).map_err(err)?;
    to_py(py, &klm::compare(&a, &b, &operator_table(operators)?).map_err(err)?)
}

#[pyfunction]
fn visualizers(py: Python<'_>) -> PyResult<Bound<'_, PyAny>> {
    to_py(py, &VisualizerRegistry::with_builtins().list())
}

/// Presentation model of `results` as a dict.
#[pyfunction]
#[pyo3(signature = (results, visualizer_id = None, options = None))]
fn render<'py>(
    py: Python<'py>,
    results: &PyResultSet,
    visualizer_id: Option<&str>,
    options: Option<RenderOptions>,
) -> PyResult<Bound<'py, PyAny>> {
    let model = VisualizerRegistry::with_builtins()
        .render(&results.inner, visualizer_id, &options.unwrap_or_default())
        .map_err(err)?;
    to_py(py, &model)
}

/// Ranked selector suggestions for the element at `node_path` in `html`.
#[pyfunction]
fn suggest_selectors<'py>(
    py: Python<'py>,
    html: &str,
    url: &str,
    node_path: Vec<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let doc = DocumentHandle::parse(html, url::Url::parse(url).map_err(err)?);
    let suggestions = suggest(&doc, &NodePath::new(node_path), &RankingPolicy::default()).map_err(err)?;
    to_py(py, &suggestions)
}

#[pyfunction]
fn export_bundle(specs: Vec<PyServiceSpec>) -> String {
    let specs: Vec<_> = specs.into_iter().map(|s| s.inner).collect();
    codec::export_bundle(&specs)
}

/// Parses a bundle; returns the imported specs and one message per rejection.
#[pyfunction]
#[pyo3(signature = (text, taken_ids = None))]
fn import_bundle(text: &str, taken_ids: Option<Vec<String>>) -> PyResult<(Vec<PyServiceSpec>, Vec<String>)> {
    let taken = taken_ids.unwrap_or_default();
    let report = codec::import_bundle(text, &|id| taken.iter().any(|t| t == id)).map_err(err)?;
    Ok((
        report
            .imported
            .into_iter()
            .map(|inner| PyServiceSpec { inner })
            .collect(),
        report
            .rejected
            .into_iter()
            .map(|r| format!("entry {}: {}", r.index, r.reason))
            .collect(),
    ))
}

#[pymodule]
fn searchsvc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SearchServiceError", m.py().get_type::<SearchServiceError>())?;
    m.add_class::<PyServiceSpec>()?;
    m.add_class::<PyResultSet>()?;
    m.add_class::<PyEngine>()?;
    m.add_class::<PyFixtureServer>()?;
    m.add_function(wrap_pyfunction!(ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(klm_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(klm_compare, m)?)?;
    m.add_function(wrap_pyfunction!(visualizers, m)?)?;
    m.add_function(wrap_pyfunction!(render, m)?)?;
    m.add_function(wrap_pyfunction!(suggest_selectors, m)?)?;
    m.add_function(wrap_pyfunction!(export_bundle, m)?)?;
    m.add_function(wrap_pyfunction!(import_bundle, m)?)?;
    Ok(())
}
