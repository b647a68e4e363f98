//! Query execution, pagination and strategy detection over HTTP.
//!
//! Browser interactions are re-expressed as requests: "write and click to
//! reload" is a real form submission, the ajax variants replay a request
//! template whose response is a full document or an HTML fragment.

mod detect;
pub mod fetch;
mod form;
mod ordering;
pub mod provider;
pub mod request;

use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::dom::DocumentHandle;
use crate::extract::{extract_results, PageSummary, ResultSet};
use crate::model::{
    OrderingMode, RequestModifier, SearchQuery, ServiceSpec, StrategyConfig, StrategyVariant,
};
use crate::selector::{CompiledSelector, SelectorError};

pub use detect::{DetectOptions, DetectionAttempt};
pub use fetch::{FetchConfig, FetchError, FetchResponse, Fetcher, HttpFetcher};
pub use form::{derive_form_request, derive_with_name, FALLBACK_PARAM_NAMES};
pub use ordering::apply_local_ordering;
pub use provider::{JsonApiProvider, ProviderPage, ProviderRegistry, SearchProvider};
pub use request::{expand_template, template_has_page, BodyEncoding, HttpRequestPlan};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("the input selector matches no element")]
    InputNotFound,
    #[error("the input element has no name attribute")]
    InputHasNoName,
    #[error("the input selector matches {0} elements")]
    AmbiguousInput(usize),
    #[error("fetching {url} failed: {reason}")]
    FetchFailed { url: String, reason: String },
    #[error("strategy unconfigured: {0}")]
    StrategyUnconfigured(String),
    #[error("no such page: {0}")]
    NoSuchPage(String),
    #[error("no applicable strategy ({})", .0.join("; "))]
    NoApplicableStrategy(Vec<String>),
    #[error("provider {0:?} is already registered")]
    DuplicateProvider(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid request template: {0}")]
    InvalidTemplate(String),
    #[error(transparent)]
    Selector(#[from] SelectorError),
}

impl EngineError {
    /// Stable kebab-case name used by the API and CLI.
    pub fn name(&self) -> &'static str {
        match self {
            EngineError::InputNotFound => "input-not-found",
            EngineError::InputHasNoName => "input-has-no-name",
            EngineError::AmbiguousInput(_) => "ambiguous-input",
            EngineError::FetchFailed { .. } => "fetch-failed",
            EngineError::StrategyUnconfigured(_) => "strategy-unconfigured",
            EngineError::NoSuchPage(_) => "no-such-page",
            EngineError::NoApplicableStrategy(_) => "no-applicable-strategy",
            EngineError::DuplicateProvider(_) => "duplicate-provider",
            EngineError::InvalidQuery(_) => "invalid-query",
            EngineError::InvalidTemplate(_) => "invalid-template",
            EngineError::Selector(_) => "invalid-selector",
        }
    }

    pub(crate) fn fetch(url: &Url, reason: impl Into<String>) -> Self {
        EngineError::FetchFailed {
            url: url.to_string(),
            reason: reason.into(),
        }
    }
}

/// Source of `fetched_at` timestamps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Clock {
    #[default]
    System,
    Fixed(DateTime<Utc>),
}

impl Clock {
    pub fn now(&self) -> DateTime<Utc> {
        match self {
            Clock::System => Utc::now(),
            Clock::Fixed(t) => *t,
        }
    }
}

/// State needed to move between pages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Continuation {
    pub spec: Arc<ServiceSpec>,
    /// Requests that produced pages 1..=page_index (empty for providers).
    pub history: Vec<HttpRequestPlan>,
    pub next: Option<HttpRequestPlan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageCursor {
    pub service_id: String,
    pub query: SearchQuery,
    pub page_index: u32,
    pub has_next: bool,
    pub has_prev: bool,
    pub continuation: Continuation,
}

impl PageCursor {
    pub fn summary(&self) -> PageSummary {
        PageSummary {
            page_index: self.page_index,
            has_next: self.has_next,
            has_prev: self.has_prev,
        }
    }
}

/// Executes services. Holds only the provider registry and a clock.
#[derive(Default)]
pub struct Engine {
    providers: ProviderRegistry,
    clock: Clock,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_clock(clock: Clock) -> Self {
        Self {
            providers: ProviderRegistry::default(),
            clock,
        }
    }

    pub fn clock(&self) -> Clock {
        self.clock
    }

    pub fn register_provider(
        &self,
        provider_id: &str,
        provider: Arc<dyn SearchProvider>,
    ) -> Result<(), EngineError> {
        self.providers.register(provider_id, provider)
    }

    pub fn providers(&self) -> &ProviderRegistry {
        &self.providers
    }

    /// Runs `query` against `spec` and returns the requested page.
    pub async fn execute(
        &self,
        spec: &ServiceSpec,
        query: &SearchQuery,
        fetcher: &dyn Fetcher,
    ) -> Result<(ResultSet, PageCursor), EngineError> {
        query
            .check_against(spec)
            .map_err(EngineError::InvalidQuery)?;
        let strategy = spec
            .strategy
            .as_ref()
            .ok_or_else(|| EngineError::StrategyUnconfigured("the service has no strategy".into()))?;
        let spec = Arc::new(spec.clone());

        if let StrategyVariant::ApiBased { provider_id } = &strategy.variant {
            let provider = self.provider(provider_id)?;
            let page = provider
                .execute(&spec, query, fetcher, self.clock.now())
                .await?;
            return Ok(self.provider_page(spec, query.clone(), page));
        }

        if let Some(template) = strategy
            .request_template
            .as_ref()
            .filter(|t| template_has_page(t) && query.page > 1)
        {
            let mut plan = expand_template(template, &query.keywords, query.page)?;
            apply_modifiers(&mut plan, &spec, query)?;
            // earlier pages are reconstructible from the template
            let mut history = Vec::new();
            for page in 1..query.page {
                let mut p = expand_template(template, &query.keywords, page)?;
                apply_modifiers(&mut p, &spec, query)?;
                history.push(p);
            }
            return self.fetch_page(spec, query.clone(), history, plan, fetcher).await;
        }

        let first = first_page_plan(&spec, strategy, query, fetcher).await?;
        let (mut results, mut cursor) = self
            .fetch_page(spec, query.clone().at_page(1), Vec::new(), first, fetcher)
            .await?;
        while cursor.page_index < query.page {
            if !cursor.has_next {
                return Err(EngineError::NoSuchPage(format!(
                    "page {} requested but the results end at page {}",
                    query.page, cursor.page_index
                )));
            }
            (results, cursor) = self.next_page(&cursor, fetcher).await?;
        }
        Ok((results, cursor))
    }

    /// The request `execute` would send for `query`, without fetching results.
    /// The reload variant still fetches the search page to read its form.
    /// `None` for provider-backed services.
    pub async fn plan(
        &self,
        spec: &ServiceSpec,
        query: &SearchQuery,
        fetcher: &dyn Fetcher,
    ) -> Result<Option<HttpRequestPlan>, EngineError> {
        query
            .check_against(spec)
            .map_err(EngineError::InvalidQuery)?;
        let strategy = spec
            .strategy
            .as_ref()
            .ok_or_else(|| EngineError::StrategyUnconfigured("the service has no strategy".into()))?;
        if let StrategyVariant::ApiBased { .. } = strategy.variant {
            return Ok(None);
        }
        if let Some(template) = strategy
            .request_template
            .as_ref()
            .filter(|t| template_has_page(t) && query.page > 1)
        {
            let mut plan = expand_template(template, &query.keywords, query.page)?;
            apply_modifiers(&mut plan, spec, query)?;
            return Ok(Some(plan));
        }
        first_page_plan(spec, strategy, query, fetcher).await.map(Some)
    }

    pub async fn next_page(
        &self,
        cursor: &PageCursor,
        fetcher: &dyn Fetcher,
    ) -> Result<(ResultSet, PageCursor), EngineError> {
        if !cursor.has_next {
            return Err(EngineError::NoSuchPage(format!(
                "page {} is the last page",
                cursor.page_index
            )));
        }
        let spec = cursor.continuation.spec.clone();
        let query = cursor.query.clone().at_page(cursor.page_index + 1);
        if let Some(provider_id) = api_provider(&spec) {
            let provider = self.provider(&provider_id)?;
            let page = provider
                .next_page(&spec, &cursor.query, fetcher, self.clock.now())
                .await?;
            return Ok(self.provider_page(spec, query, page));
        }
        let plan = cursor
            .continuation
            .next
            .clone()
            .ok_or_else(|| EngineError::NoSuchPage("no request for the next page".into()))?;
        let history = cursor.continuation.history.clone();
        self.fetch_page(spec, query, history, plan, fetcher).await
    }

    pub async fn prev_page(
        &self,
        cursor: &PageCursor,
        fetcher: &dyn Fetcher,
    ) -> Result<(ResultSet, PageCursor), EngineError> {
        if cursor.page_index <= 1 {
            return Err(EngineError::NoSuchPage("already at the first page".into()));
        }
        let spec = cursor.continuation.spec.clone();
        let query = cursor.query.clone().at_page(cursor.page_index - 1);
        if let Some(provider_id) = api_provider(&spec) {
            let provider = self.provider(&provider_id)?;
            let page = provider
                .execute(&spec, &query, fetcher, self.clock.now())
                .await?;
            return Ok(self.provider_page(spec, query, page));
        }
        let mut history = cursor.continuation.history.clone();
        let target = query.page as usize;
        if history.len() < target {
            return Err(EngineError::NoSuchPage(
                "the cursor does not record the previous page".into(),
            ));
        }
        history.truncate(target);
        let plan = history.pop().expect("target >= 1");
        self.fetch_page(spec, query, history, plan, fetcher).await
    }

    fn provider(&self, provider_id: &str) -> Result<Arc<dyn SearchProvider>, EngineError> {
        self.providers.get(provider_id).ok_or_else(|| {
            EngineError::StrategyUnconfigured(format!("no provider registered as {provider_id:?}"))
        })
    }

    fn provider_page(
        &self,
        spec: Arc<ServiceSpec>,
        query: SearchQuery,
        page: ProviderPage,
    ) -> (ResultSet, PageCursor) {
        let mut items = page.items;
        local_order(&spec, &query, &mut items);
        let cursor = PageCursor {
            service_id: spec.id.clone(),
            page_index: query.page,
            has_next: page.has_next,
            has_prev: query.page > 1,
            query: query.clone(),
            continuation: Continuation {
                spec: spec.clone(),
                history: Vec::new(),
                next: None,
            },
        };
        let mut results = ResultSet::empty(spec.id.clone(), query);
        if items.is_empty() {
            results.diagnostics.push("extraction yielded nothing".into());
        }
        results.items = items;
        results.page = cursor.summary();
        (results, cursor)
    }

    /// Fetches `plan` as page `query.page` and builds the cursor around it.
    async fn fetch_page(
        &self,
        spec: Arc<ServiceSpec>,
        query: SearchQuery,
        mut history: Vec<HttpRequestPlan>,
        plan: HttpRequestPlan,
        fetcher: &dyn Fetcher,
    ) -> Result<(ResultSet, PageCursor), EngineError> {
        let url = plan.request_url();
        let response = fetcher
            .fetch(&plan)
            .await
            .map_err(|e| EngineError::fetch(&url, e.to_string()))?;
        if response.status >= 400 {
            return Err(EngineError::fetch(&url, format!("HTTP status {}", response.status)));
        }
        let doc = DocumentHandle::parse(&response.body, response.final_url.clone());
        let extraction = extract_results(&doc, &spec.result_spec, &doc.base_url, self.clock.now())?;
        let mut items = extraction.objects;
        local_order(&spec, &query, &mut items);

        let template = spec
            .strategy
            .as_ref()
            .and_then(|s| s.request_template.as_ref())
            .filter(|t| template_has_page(t));
        let next_link = match &spec.binding.next_page {
            Some(sel) => CompiledSelector::compile(sel)?
                .first(&doc.document, None)
                .map(|n| doc.document.attr(n, "href").and_then(|h| doc.resolve(h))),
            None => None,
        };
        let has_next = match (&spec.binding.next_page, template) {
            (Some(_), _) => next_link.is_some(),
            (None, Some(_)) => !items.is_empty(),
            (None, None) => false,
        };
        let next = if !has_next {
            None
        } else if let Some(t) = template {
            let mut p = expand_template(t, &query.keywords, query.page + 1)?;
            apply_modifiers(&mut p, &spec, &query)?;
            Some(p)
        } else {
            next_link.flatten().map(HttpRequestPlan::get)
        };
        let has_next = has_next && next.is_some();

        history.push(plan);
        let cursor = PageCursor {
            service_id: spec.id.clone(),
            page_index: query.page,
            has_next,
            has_prev: query.page > 1,
            query: query.clone(),
            continuation: Continuation {
                spec: spec.clone(),
                history,
                next,
            },
        };
        let mut results = ResultSet::empty(spec.id.clone(), query);
        if items.is_empty() {
            results.diagnostics.push("extraction yielded nothing".into());
        }
        if extraction.dropped > 0 {
            results.diagnostics.push(format!(
                "{} result(s) dropped for lack of a target URL",
                extraction.dropped
            ));
        }
        results.items = items;
        results.page = cursor.summary();
        Ok((results, cursor))
    }
}

fn api_provider(spec: &ServiceSpec) -> Option<String> {
    match spec.strategy.as_ref().map(|s| &s.variant) {
        Some(StrategyVariant::ApiBased { provider_id }) => Some(provider_id.clone()),
        _ => None,
    }
}

fn local_order(spec: &ServiceSpec, query: &SearchQuery, items: &mut [crate::extract::DomainObject]) {
    if let Some(OrderingMode::Local(ordering)) = query
        .active_ordering
        .as_deref()
        .and_then(|o| spec.ordering(o))
        .map(|o| &o.mode)
    {
        apply_local_ordering(items, ordering);
    }
}

/// Active filters in query order, then the remote ordering.
pub fn apply_modifiers(
    plan: &mut HttpRequestPlan,
    spec: &ServiceSpec,
    query: &SearchQuery,
) -> Result<(), EngineError> {
    let mut modifiers: Vec<&RequestModifier> = Vec::new();
    for name in &query.active_filters {
        let (_, condition) = spec
            .filters
            .find(name)
            .ok_or_else(|| EngineError::InvalidQuery(format!("unknown filter {name:?}")))?;
        modifiers.push(&condition.activation);
    }
    if let Some(OrderingMode::Remote(m)) = query
        .active_ordering
        .as_deref()
        .and_then(|o| spec.ordering(o))
        .map(|o| &o.mode)
    {
        modifiers.push(m);
    }
    for m in modifiers {
        plan.apply(m, &query.keywords, query.page)?;
    }
    Ok(())
}

/// Request for page 1. The reload variant submits the live form and falls
/// back to the recorded template when the form cannot be derived.
async fn first_page_plan(
    spec: &ServiceSpec,
    strategy: &StrategyConfig,
    query: &SearchQuery,
    fetcher: &dyn Fetcher,
) -> Result<HttpRequestPlan, EngineError> {
    let from_template = || -> Result<HttpRequestPlan, EngineError> {
        let template = strategy.request_template.as_ref().ok_or_else(|| {
            EngineError::StrategyUnconfigured(format!(
                "{} needs a request template",
                strategy.variant.name()
            ))
        })?;
        let mut plan = expand_template(template, &query.keywords, 1)?;
        apply_modifiers(&mut plan, spec, query)?;
        Ok(plan)
    };
    match strategy.variant {
        StrategyVariant::WriteAndClickToReload => {
            let derived = async {
                let page_url = Url::parse(&spec.binding.search_page_url)
                    .map_err(|e| EngineError::InvalidTemplate(e.to_string()))?;
                let response = fetcher
                    .fetch(&HttpRequestPlan::get(page_url.clone()))
                    .await
                    .map_err(|e| EngineError::fetch(&page_url, e.to_string()))?;
                if response.status >= 400 {
                    return Err(EngineError::fetch(
                        &page_url,
                        format!("HTTP status {}", response.status),
                    ));
                }
                let doc = DocumentHandle::parse(&response.body, response.final_url);
                let mut plan = derive_form_request(&doc, &spec.binding, &query.keywords)?;
                apply_modifiers(&mut plan, spec, query)?;
                Ok(plan)
            }
            .await;
            match derived {
                Ok(plan) => Ok(plan),
                Err(e @ EngineError::FetchFailed { .. }) => Err(e),
                Err(e) if strategy.request_template.is_none() => Err(e),
                Err(_) => from_template(),
            }
        }
        _ => from_template(),
    }
}

#[cfg(test)]
mod tests;
