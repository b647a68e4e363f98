//! Turning result documents into domain objects.

use chrono::{DateTime, Utc};
use futures::stream::{self, StreamExt};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use url::Url;

use crate::dom::{Document, DocumentHandle, NodeId};
use crate::engine::fetch::Fetcher;
use crate::engine::request::HttpRequestPlan;
use crate::model::{Extract, PropertyLocation, PropertySpec, SearchQuery, SearchResultSpec};
use crate::selector::{CompiledSelector, SelectorError};

/// Value of one property of one result.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyValue {
    Text(String),
    Url(String),
    Missing,
}

impl PropertyValue {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropertyValue::Text(s) | PropertyValue::Url(s) => Some(s),
            PropertyValue::Missing => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, PropertyValue::Missing)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_url: String,
    pub container_index: usize,
    pub fetched_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainObject {
    #[serde(rename = "type")]
    pub type_name: String,
    /// One entry per declared property, in declaration order.
    pub values: IndexMap<String, PropertyValue>,
    pub target_url: String,
    pub provenance: Provenance,
}

impl DomainObject {
    pub fn value(&self, property: &str) -> Option<&str> {
        self.values.get(property).and_then(PropertyValue::as_str)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSummary {
    pub page_index: u32,
    pub has_next: bool,
    pub has_prev: bool,
}

/// One page of extracted results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultSet {
    pub service_id: String,
    pub query: SearchQuery,
    pub items: Vec<DomainObject>,
    pub page: PageSummary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl ResultSet {
    pub fn empty(service_id: impl Into<String>, query: SearchQuery) -> Self {
        let page = PageSummary {
            page_index: query.page,
            has_next: false,
            has_prev: query.page > 1,
        };
        Self {
            service_id: service_id.into(),
            query,
            items: Vec::new(),
            page,
            diagnostics: Vec::new(),
        }
    }

    /// Property names in declaration order, taken from the first item.
    pub fn property_names(&self) -> Vec<String> {
        self.items
            .first()
            .map(|o| o.values.keys().cloned().collect())
            .unwrap_or_default()
    }
}

/// Outcome of [`extract_results`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub objects: Vec<DomainObject>,
    /// Containers dropped because their target URL was absent or unusable.
    pub dropped: usize,
    pub container_count: usize,
}

/// Collapses whitespace runs to single spaces and trims both ends.
pub fn normalize_text(raw: &str) -> String {
    raw.split_whitespace().collect::<Vec<_>>().join(" ")
}

const URL_ATTRIBUTES: &[&str] = &["href", "src"];

fn extract_value(
    doc: &Document,
    node: NodeId,
    extract: &Extract,
    base: &Url,
) -> PropertyValue {
    match extract {
        Extract::Text => PropertyValue::Text(normalize_text(&doc.text_content(node))),
        Extract::InnerHtml => PropertyValue::Text(doc.inner_html(node)),
        Extract::Attribute(name) => match doc.attr(node, name) {
            None => PropertyValue::Missing,
            Some(raw) if URL_ATTRIBUTES.contains(&name.to_ascii_lowercase().as_str()) => {
                match base.join(raw.trim()) {
                    Ok(u) => PropertyValue::Url(u.to_string()),
                    Err(_) => PropertyValue::Text(raw.to_string()),
                }
            }
            Some(raw) => PropertyValue::Text(raw.to_string()),
        },
    }
}

/// First match of `property` under `scope` (or the whole document).
fn property_value(
    doc: &Document,
    compiled: &CompiledSelector,
    property: &PropertySpec,
    scope: Option<NodeId>,
    base: &Url,
) -> PropertyValue {
    match compiled.first(doc, scope) {
        Some(node) => extract_value(doc, node, &property.extract, base),
        None => PropertyValue::Missing,
    }
}

/// One object per container match, in document order. In-result properties
/// are evaluated inside each container; in-target ones start out missing.
pub fn extract_results(
    doc: &DocumentHandle,
    spec: &SearchResultSpec,
    base_url: &Url,
    fetched_at: DateTime<Utc>,
) -> Result<Extraction, SelectorError> {
    let d = &doc.document;
    let containers = CompiledSelector::compile(&spec.container)?.select(d, None);
    let target = spec
        .target_url
        .as_ref()
        .map(|t| CompiledSelector::compile(&t.selector).map(|c| (t, c)))
        .transpose()?;
    let properties = spec
        .properties
        .iter()
        .map(|p| CompiledSelector::compile(&p.selector).map(|c| (p, c)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut objects = Vec::with_capacity(containers.len());
    let mut dropped = 0;
    for (index, container) in containers.iter().copied().enumerate() {
        let target_url = target.as_ref().and_then(|(t, c)| {
            let node = c.first(d, Some(container))?;
            let Extract::Attribute(name) = &t.extract else {
                return None;
            };
            let raw = d.attr(node, name)?;
            base_url.join(raw.trim()).ok()
        });
        let Some(target_url) = target_url else {
            dropped += 1;
            continue;
        };
        let values = properties
            .iter()
            .map(|(p, c)| {
                let v = match p.location {
                    PropertyLocation::InResult => {
                        property_value(d, c, p, Some(container), base_url)
                    }
                    PropertyLocation::InTarget => PropertyValue::Missing,
                };
                (p.name.clone(), v)
            })
            .collect();
        objects.push(DomainObject {
            type_name: spec.type_name.clone(),
            values,
            target_url: target_url.to_string(),
            provenance: Provenance {
                source_url: base_url.to_string(),
                container_index: index,
                fetched_at,
            },
        });
    }
    Ok(Extraction {
        objects,
        dropped,
        container_count: containers.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichFailure {
    pub index: usize,
    pub target_url: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Enrichment {
    pub objects: Vec<DomainObject>,
    pub failures: Vec<EnrichFailure>,
}

/// Fills in-target properties by fetching each object's target page.
///
/// Fetches run concurrently up to the fetcher's `max_parallel`; output order
/// always equals input order. Objects whose in-target values are all present
/// are left alone, and a failed fetch leaves that object's values missing.
pub async fn enrich_in_target(
    objects: Vec<DomainObject>,
    spec: &SearchResultSpec,
    fetcher: &dyn Fetcher,
) -> Result<Enrichment, SelectorError> {
    let targets = spec
        .properties
        .iter()
        .filter(|p| p.location == PropertyLocation::InTarget)
        .map(|p| CompiledSelector::compile(&p.selector).map(|c| (p, c)))
        .collect::<Result<Vec<_>, _>>()?;
    if targets.is_empty() {
        return Ok(Enrichment {
            objects,
            failures: Vec::new(),
        });
    }
    let parallel = fetcher.config().max_parallel.max(1);
    let targets = &targets;
    let results: Vec<(DomainObject, Option<EnrichFailure>)> = stream::iter(
        objects.into_iter().enumerate(),
    )
    .map(|(index, mut object)| async move {
        let complete = targets
            .iter()
            .all(|(p, _)| object.values.get(&p.name).is_some_and(|v| !v.is_missing()));
        if complete {
            return (object, None);
        }
        let fail = |reason: String, url: &str| EnrichFailure {
            index,
            target_url: url.to_string(),
            reason,
        };
        let url = match Url::parse(&object.target_url) {
            Ok(u) => u,
            Err(e) => {
                let f = fail(e.to_string(), &object.target_url);
                return (object, Some(f));
            }
        };
        let page = match fetcher.fetch(&HttpRequestPlan::get(url)).await {
            Ok(resp) if resp.status < 400 => resp,
            Ok(resp) => {
                let f = fail(format!("HTTP status {}", resp.status), &object.target_url);
                return (object, Some(f));
            }
            Err(e) => {
                let f = fail(e.to_string(), &object.target_url);
                return (object, Some(f));
            }
        };
        let doc = DocumentHandle::parse(&page.body, page.final_url.clone());
        for (p, c) in targets {
            let v = property_value(&doc.document, c, p, None, &doc.base_url);
            object.values.insert(p.name.clone(), v);
        }
        (object, None)
    })
    .buffered(parallel)
    .collect()
    .await;

    let mut enriched = Enrichment {
        objects: Vec::with_capacity(results.len()),
        failures: Vec::new(),
    };
    for (object, failure) in results {
        enriched.objects.push(object);
        enriched.failures.extend(failure);
    }
    Ok(enriched)
}
