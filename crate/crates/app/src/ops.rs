//! Operations shared by the CLI and the HTTP API.

use std::sync::Arc;

use searchsvc_core::engine::{DetectOptions, FetchConfig, Fetcher, HttpFetcher, HttpRequestPlan};
use searchsvc_core::extract::enrich_in_target;
use searchsvc_core::selector::{suggest_selectors, RankingPolicy, SelectorSuggestion};
use searchsvc_core::visualize::{PresentationModel, RenderOptions, VisualizerRegistry};
use searchsvc_core::{
    Engine, NodePath, RequestTemplate, ResultSet, SearchQuery, ServiceSpec, StrategyConfig,
};
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::AppError;
use crate::snapshot::{Snapshot, SnapshotCache};
use crate::store::SpecStore;

fn default_page() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchRequest {
    pub keywords: String,
    #[serde(default)]
    pub filters: Vec<String>,
    #[serde(default)]
    pub ordering: Option<String>,
    #[serde(default = "default_page")]
    pub page: u32,
    #[serde(default)]
    pub enrich: bool,
}

impl SearchRequest {
    pub fn new(keywords: impl Into<String>) -> Self {
        Self {
            keywords: keywords.into(),
            filters: Vec::new(),
            ordering: None,
            page: 1,
            enrich: false,
        }
    }

    pub fn query(&self) -> SearchQuery {
        SearchQuery {
            keywords: self.keywords.clone(),
            active_filters: self.filters.clone(),
            active_ordering: self.ordering.clone(),
            page: self.page,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectRequest {
    pub probe_a: String,
    pub probe_b: String,
    #[serde(default)]
    pub recorded_templates: Vec<RequestTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderRequest {
    pub search: SearchRequest,
    #[serde(default)]
    pub visualizer_id: Option<String>,
    #[serde(default)]
    pub options: RenderOptions,
}

/// Everything a command or request handler needs.
pub struct AppContext {
    pub store: SpecStore,
    pub engine: Engine,
    pub fetcher: Arc<dyn Fetcher>,
    pub visualizers: VisualizerRegistry,
    pub snapshots: SnapshotCache,
}

impl AppContext {
    /// Opens the store and registers the fixture JSON provider.
    pub fn from_settings(settings: &Settings) -> Result<Self, AppError> {
        let store = SpecStore::open(&settings.store_dir)?;
        let fetcher = HttpFetcher::shared(settings.fetch.clone())
            .map_err(|e| AppError::Io(e.to_string()))?;
        let engine = Engine::new();
        let ctx = Self::new(store, engine, fetcher);
        ctx.engine.register_provider(
            searchsvc_fixtures::specs::PROVIDER_ID,
            searchsvc_fixtures::specs::json_provider(&settings.fixture_base()),
        )?;
        Ok(ctx)
    }

    pub fn new(store: SpecStore, engine: Engine, fetcher: Arc<dyn Fetcher>) -> Self {
        Self {
            store,
            engine,
            fetcher,
            visualizers: VisualizerRegistry::with_builtins(),
            snapshots: SnapshotCache::default(),
        }
    }

    /// A context for local use with an unthrottled fetcher.
    pub fn local(store: SpecStore, engine: Engine) -> Self {
        let fetcher = HttpFetcher::shared(FetchConfig::local()).expect("client builds");
        Self::new(store, engine, fetcher)
    }

    pub fn spec(&self, id: &str) -> Result<ServiceSpec, AppError> {
        Ok(self.store.get(id)?)
    }

    pub async fn search(
        &self,
        spec: &ServiceSpec,
        request: &SearchRequest,
    ) -> Result<ResultSet, AppError> {
        if request.page == 0 {
            return Err(AppError::BadRequest("pages are numbered from 1".into()));
        }
        let (mut results, _) = self
            .engine
            .execute(spec, &request.query(), self.fetcher.as_ref())
            .await?;
        if request.enrich {
            let enrichment =
                enrich_in_target(results.items, &spec.result_spec, self.fetcher.as_ref()).await?;
            results.items = enrichment.objects;
            results.diagnostics.extend(enrichment.failures.iter().map(|f| {
                format!(
                    "enrichment of item {} from {} failed: {}",
                    f.index + 1,
                    f.target_url,
                    f.reason
                )
            }));
        }
        Ok(results)
    }

    /// The first request a search would send; `None` for provider services.
    pub async fn plan(
        &self,
        spec: &ServiceSpec,
        request: &SearchRequest,
    ) -> Result<Option<HttpRequestPlan>, AppError> {
        Ok(self
            .engine
            .plan(spec, &request.query(), self.fetcher.as_ref())
            .await?)
    }

    pub fn render(
        &self,
        results: &ResultSet,
        visualizer_id: Option<&str>,
        options: &RenderOptions,
    ) -> Result<PresentationModel, AppError> {
        Ok(self.visualizers.render(results, visualizer_id, options)?)
    }

    /// Detects a strategy for `spec` and stores the spec with it.
    pub async fn detect(
        &self,
        mut spec: ServiceSpec,
        request: &DetectRequest,
    ) -> Result<(ServiceSpec, StrategyConfig), AppError> {
        let options = DetectOptions {
            recorded_templates: request.recorded_templates.clone(),
        };
        let strategy = self
            .engine
            .detect_strategy(
                &spec,
                (&request.probe_a, &request.probe_b),
                self.fetcher.as_ref(),
                &options,
            )
            .await?;
        spec.strategy = Some(strategy.clone());
        self.store.save(&spec)?;
        Ok((spec, strategy))
    }

    pub async fn snapshot(&self, url: &str) -> Result<Arc<Snapshot>, AppError> {
        let url = url::Url::parse(url)
            .map_err(|e| AppError::BadRequest(format!("invalid url {url:?}: {e}")))?;
        let response = self
            .fetcher
            .fetch(&HttpRequestPlan::get(url.clone()))
            .await
            .map_err(|e| AppError::Upstream {
                kind: "fetch-failed",
                message: e.to_string(),
            })?;
        if response.status >= 400 {
            return Err(AppError::Upstream {
                kind: "fetch-failed",
                message: format!("{url} answered with HTTP status {}", response.status),
            });
        }
        let fetched_at = self.engine.clock().now().to_rfc3339();
        Ok(self
            .snapshots
            .insert(response.final_url, fetched_at, &response.body))
    }

    pub fn suggest(
        &self,
        snapshot_id: &str,
        node_path: Vec<usize>,
    ) -> Result<Vec<SelectorSuggestion>, AppError> {
        let snapshot = self
            .snapshots
            .get(snapshot_id)
            .ok_or_else(|| AppError::not_found("snapshot", snapshot_id))?;
        Ok(suggest_selectors(
            &snapshot.document,
            &NodePath::new(node_path),
            &RankingPolicy::default(),
        )?)
    }
}

/// Per-step and total time of a KLM scenario.
pub fn estimate(
    scenario: &searchsvc_core::klm::KlmScenario,
    table: &searchsvc_core::klm::OperatorTable,
) -> Result<crate::output::Estimate, AppError> {
    let steps = scenario
        .steps
        .iter()
        .map(|s| {
            Ok(crate::output::StepTime {
                label: s.label.clone(),
                seconds: s.time(table)?,
            })
        })
        .collect::<Result<Vec<_>, AppError>>()?;
    Ok(crate::output::Estimate {
        scenario: scenario.name.clone(),
        total: searchsvc_core::klm::estimate(scenario, table)?,
        steps,
    })
}
