use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use async_trait::async_trait;
use chrono::{DateTime, Utc};
use indexmap::IndexMap;
use serde_json::Value;
use url::Url;

use crate::extract::{DomainObject, PropertyValue, Provenance};
use crate::model::{PropertyLocation, SearchQuery, ServiceSpec};

use super::fetch::Fetcher;
use super::request::HttpRequestPlan;
use super::EngineError;

/// One page produced by a provider.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProviderPage {
    pub items: Vec<DomainObject>,
    pub has_next: bool,
}

/// Executes `api_based` services without going through HTML.
#[async_trait]
pub trait SearchProvider: Send + Sync {
    async fn execute(
        &self,
        spec: &ServiceSpec,
        query: &SearchQuery,
        fetcher: &dyn Fetcher,
        fetched_at: DateTime<Utc>,
    ) -> Result<ProviderPage, EngineError>;

    async fn next_page(
        &self,
        spec: &ServiceSpec,
        query: &SearchQuery,
        fetcher: &dyn Fetcher,
        fetched_at: DateTime<Utc>,
    ) -> Result<ProviderPage, EngineError> {
        let next = query.clone().at_page(query.page + 1);
        self.execute(spec, &next, fetcher, fetched_at).await
    }
}

#[derive(Default)]
pub struct ProviderRegistry {
    providers: RwLock<HashMap<String, Arc<dyn SearchProvider>>>,
}

impl ProviderRegistry {
    pub fn register(
        &self,
        provider_id: &str,
        provider: Arc<dyn SearchProvider>,
    ) -> Result<(), EngineError> {
        let mut map = self.providers.write().expect("registry lock poisoned");
        if map.contains_key(provider_id) {
            return Err(EngineError::DuplicateProvider(provider_id.to_string()));
        }
        map.insert(provider_id.to_string(), provider);
        Ok(())
    }

    pub fn get(&self, provider_id: &str) -> Option<Arc<dyn SearchProvider>> {
        self.providers
            .read()
            .expect("registry lock poisoned")
            .get(provider_id)
            .cloned()
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .providers
            .read()
            .expect("registry lock poisoned")
            .keys()
            .cloned()
            .collect();
        ids.sort();
        ids
    }
}

/// Provider for JSON search APIs shaped as
/// `{"results": [{...}], "has_next": bool}`.
#[derive(Debug, Clone)]
pub struct JsonApiProvider {
    pub endpoint: Url,
    pub query_param: String,
    pub page_param: String,
    pub results_field: String,
    pub has_next_field: String,
    /// JSON field holding the (possibly relative) target URL.
    pub target_field: String,
    /// Spec property name to JSON field.
    pub fields: Vec<(String, String)>,
}

impl JsonApiProvider {
    pub fn new(endpoint: Url, target_field: &str, fields: &[(&str, &str)]) -> Self {
        Self {
            endpoint,
            query_param: "q".into(),
            page_param: "page".into(),
            results_field: "results".into(),
            has_next_field: "has_next".into(),
            target_field: target_field.into(),
            fields: fields
                .iter()
                .map(|(p, f)| (p.to_string(), f.to_string()))
                .collect(),
        }
    }

    fn request(&self, spec: &ServiceSpec, query: &SearchQuery) -> HttpRequestPlan {
        let mut plan = HttpRequestPlan::get(self.endpoint.clone());
        plan.set_param(&self.query_param, &query.keywords);
        plan.set_param(&self.page_param, &query.page.to_string());
        for name in &query.active_filters {
            if let Some((_, c)) = spec.filters.find(name) {
                if let crate::model::RequestModifier::ParamSet(pairs) = &c.activation {
                    for (k, v) in pairs {
                        plan.set_param(k, v);
                    }
                }
            }
        }
        if let Some(crate::model::OrderingMode::Remote(crate::model::RequestModifier::ParamSet(
            pairs,
        ))) = query
            .active_ordering
            .as_deref()
            .and_then(|o| spec.ordering(o))
            .map(|o| &o.mode)
        {
            for (k, v) in pairs {
                plan.set_param(k, v);
            }
        }
        plan
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(crate::extract::normalize_text(s)),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

#[async_trait]
impl SearchProvider for JsonApiProvider {
    async fn execute(
        &self,
        spec: &ServiceSpec,
        query: &SearchQuery,
        fetcher: &dyn Fetcher,
        fetched_at: DateTime<Utc>,
    ) -> Result<ProviderPage, EngineError> {
        let plan = self.request(spec, query);
        let url = plan.request_url();
        let response = fetcher
            .fetch(&plan)
            .await
            .map_err(|e| EngineError::fetch(&url, e.to_string()))?;
        if response.status >= 400 {
            return Err(EngineError::fetch(&url, format!("HTTP status {}", response.status)));
        }
        let body: Value = serde_json::from_str(&response.body)
            .map_err(|e| EngineError::fetch(&url, format!("invalid JSON: {e}")))?;
        let rows = body
            .get(&self.results_field)
            .and_then(Value::as_array)
            .cloned()
            .unwrap_or_default();
        let mut items = Vec::with_capacity(rows.len());
        for (index, row) in rows.iter().enumerate() {
            let Some(target) = row
                .get(&self.target_field)
                .and_then(Value::as_str)
                .and_then(|t| response.final_url.join(t).ok())
            else {
                continue;
            };
            let mut values = IndexMap::new();
            for p in &spec.result_spec.properties {
                let v = match p.location {
                    PropertyLocation::InTarget => PropertyValue::Missing,
                    PropertyLocation::InResult => self
                        .fields
                        .iter()
                        .find(|(prop, _)| *prop == p.name)
                        .and_then(|(_, field)| row.get(field))
                        .and_then(scalar)
                        .map_or(PropertyValue::Missing, PropertyValue::Text),
                };
                values.insert(p.name.clone(), v);
            }
            items.push(DomainObject {
                type_name: spec.result_spec.type_name.clone(),
                values,
                target_url: target.to_string(),
                provenance: Provenance {
                    source_url: response.final_url.to_string(),
                    container_index: index,
                    fetched_at,
                },
            });
        }
        let has_next = body
            .get(&self.has_next_field)
            .and_then(Value::as_bool)
            .unwrap_or(false);
        Ok(ProviderPage { items, has_next })
    }
}
