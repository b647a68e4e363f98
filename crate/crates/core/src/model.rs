//! Search Service domain types.
//!
//! Everything a service needs to be executed headlessly lives in [`ServiceSpec`]:
//! how to reach the engine ([`EngineBinding`]), how queries become requests
//! ([`StrategyConfig`]), what a result looks like ([`SearchResultSpec`]) and the
//! filters and orderings the original site offers. All types are plain values.

use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// The only spec format version this crate reads and writes.
pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectorKind {
    Css,
    Xpath,
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectorKind::Css => f.write_str("css"),
            SelectorKind::Xpath => f.write_str("xpath"),
        }
    }
}

/// A locator over parsed HTML.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Selector {
    pub kind: SelectorKind,
    pub expression: String,
    pub expect_many: bool,
}

impl Selector {
    pub fn css(expression: impl Into<String>) -> Self {
        Self {
            kind: SelectorKind::Css,
            expression: expression.into(),
            expect_many: false,
        }
    }

    pub fn xpath(expression: impl Into<String>) -> Self {
        Self {
            kind: SelectorKind::Xpath,
            expression: expression.into(),
            expect_many: false,
        }
    }

    pub fn many(mut self) -> Self {
        self.expect_many = true;
        self
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.expression)
    }
}

/// The UI controls of the original search page that a service automates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineBinding {
    pub search_page_url: String,
    pub input: Selector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trigger: Option<Selector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_page: Option<Selector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prev_page: Option<Selector>,
    /// Control that must be clicked before the input becomes visible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reveal: Option<Selector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertyLocation {
    /// Read from the result snippet on the results page.
    InResult,
    /// Read from the page behind the result's target URL.
    InTarget,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extract {
    Text,
    Attribute(String),
    InnerHtml,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    pub name: String,
    pub location: PropertyLocation,
    pub selector: Selector,
    pub extract: Extract,
}

impl PropertySpec {
    pub fn in_result(name: impl Into<String>, selector: Selector, extract: Extract) -> Self {
        Self {
            name: name.into(),
            location: PropertyLocation::InResult,
            selector,
            extract,
        }
    }

    pub fn in_target(name: impl Into<String>, selector: Selector, extract: Extract) -> Self {
        Self {
            name: name.into(),
            location: PropertyLocation::InTarget,
            selector,
            extract,
        }
    }
}

/// Declared structure of one search result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchResultSpec {
    pub type_name: String,
    pub container: Selector,
    /// Mandatory; kept optional in the type so validation can report its absence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_url: Option<PropertySpec>,
    pub properties: Vec<PropertySpec>,
}

impl SearchResultSpec {
    pub fn property(&self, name: &str) -> Option<&PropertySpec> {
        self.properties.iter().find(|p| p.name == name)
    }

    pub fn property_names(&self) -> impl Iterator<Item = &str> {
        self.properties.iter().map(|p| p.name.as_str())
    }

    pub fn has_in_target(&self) -> bool {
        self.properties
            .iter()
            .any(|p| p.location == PropertyLocation::InTarget)
    }
}

/// How a filter or remote ordering changes the outgoing request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestModifier {
    /// Replace the request URL; may use `{query}` and `{page}`.
    UrlOverride(String),
    /// Set (replace or append) query/body parameters.
    ParamSet(Vec<(String, String)>),
    /// Append to the URL path.
    PathSuffix(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub name: String,
    pub activation: RequestModifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionGroup {
    pub group_name: String,
    pub exclusive: bool,
    pub conditions: Vec<Condition>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionManager {
    #[serde(default)]
    pub groups: Vec<ConditionGroup>,
}

impl ConditionManager {
    pub fn is_empty(&self) -> bool {
        self.groups.iter().all(|g| g.conditions.is_empty())
    }

    pub fn conditions(&self) -> impl Iterator<Item = (&ConditionGroup, &Condition)> {
        self.groups
            .iter()
            .flat_map(|g| g.conditions.iter().map(move |c| (g, c)))
    }

    pub fn find(&self, name: &str) -> Option<(&ConditionGroup, &Condition)> {
        self.conditions().find(|(_, c)| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortDirection {
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Lexical,
    Numeric,
    Date,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalOrdering {
    pub property: String,
    pub direction: SortDirection,
    pub comparator: Comparator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderingMode {
    Remote(RequestModifier),
    Local(LocalOrdering),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingSpec {
    pub name: String,
    pub mode: OrderingMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyVariant {
    WriteAndClickToReload,
    WriteAndClickForAjaxCall,
    WriteForAjaxCall,
    ApiBased { provider_id: String },
}

impl StrategyVariant {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyVariant::WriteAndClickToReload => "write_and_click_to_reload",
            StrategyVariant::WriteAndClickForAjaxCall => "write_and_click_for_ajax_call",
            StrategyVariant::WriteForAjaxCall => "write_for_ajax_call",
            StrategyVariant::ApiBased { .. } => "api_based",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HttpMethod {
    #[serde(rename = "GET")]
    Get,
    #[serde(rename = "POST")]
    Post,
}

impl fmt::Display for HttpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HttpMethod::Get => f.write_str("GET"),
            HttpMethod::Post => f.write_str("POST"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    FullDocument,
    HtmlFragment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestTemplate {
    pub method: HttpMethod,
    /// Absolute URL with `{query}` and optionally `{page}` placeholders.
    pub url_template: String,
    #[serde(default)]
    pub static_params: Vec<(String, String)>,
    pub response_kind: ResponseKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyConfig {
    pub variant: StrategyVariant,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub request_template: Option<RequestTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceMetadata {
    #[serde(default)]
    pub tags: Vec<String>,
    pub created: DateTime<Utc>,
    pub format_version: String,
}

impl ServiceMetadata {
    pub fn now() -> Self {
        Self {
            tags: Vec::new(),
            created: Utc::now(),
            format_version: FORMAT_VERSION.to_string(),
        }
    }
}

/// A complete, executable Search Service definition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub id: String,
    pub name: String,
    pub binding: EngineBinding,
    /// `None` until strategy detection ran (or the author filled it in).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<StrategyConfig>,
    pub result_spec: SearchResultSpec,
    #[serde(default)]
    pub filters: ConditionManager,
    #[serde(default)]
    pub orderings: Vec<OrderingSpec>,
    pub metadata: ServiceMetadata,
}

impl ServiceSpec {
    pub fn ordering(&self, name: &str) -> Option<&OrderingSpec> {
        self.orderings.iter().find(|o| o.name == name)
    }
}

fn default_page() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchQuery {
    pub keywords: String,
    #[serde(default)]
    pub active_filters: Vec<String>,
    #[serde(default)]
    pub active_ordering: Option<String>,
    #[serde(default = "default_page")]
    pub page: u32,
}

impl SearchQuery {
    pub fn new(keywords: impl Into<String>) -> Self {
        Self {
            keywords: keywords.into(),
            active_filters: Vec::new(),
            active_ordering: None,
            page: 1,
        }
    }

    pub fn with_filter(mut self, name: impl Into<String>) -> Self {
        self.active_filters.push(name.into());
        self
    }

    pub fn with_ordering(mut self, name: impl Into<String>) -> Self {
        self.active_ordering = Some(name.into());
        self
    }

    pub fn at_page(mut self, page: u32) -> Self {
        self.page = page;
        self
    }

    /// Checks the query against the filters and orderings the spec declares.
    pub fn check_against(&self, spec: &ServiceSpec) -> Result<(), String> {
        if self.page < 1 {
            return Err("page must be >= 1".into());
        }
        let mut active_exclusive: Vec<(&str, &str)> = Vec::new();
        for name in &self.active_filters {
            let (group, _) = spec
                .filters
                .find(name)
                .ok_or_else(|| format!("unknown filter {name:?}"))?;
            if group.exclusive {
                if let Some((_, other)) = active_exclusive
                    .iter()
                    .find(|(g, other)| *g == group.group_name && *other != name)
                {
                    return Err(format!(
                        "filters {other:?} and {name:?} are exclusive in group {:?}",
                        group.group_name
                    ));
                }
                active_exclusive.push((&group.group_name, name));
            }
        }
        if let Some(ordering) = &self.active_ordering {
            if spec.ordering(ordering).is_none() {
                return Err(format!("unknown ordering {ordering:?}"));
            }
        }
        Ok(())
    }
}

/// Placeholders found in a URL template, or the first unsupported one.
pub fn template_placeholders(template: &str) -> Result<Vec<&str>, String> {
    let mut found = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| format!("unclosed placeholder in {template:?}"))?;
        let name = &after[..close];
        match name {
            "query" | "page" => found.push(name),
            other => return Err(format!("unsupported placeholder {{{other}}}")),
        }
        rest = &after[close + 1..];
    }
    if rest.contains('}') {
        return Err(format!("unbalanced '}}' in {template:?}"));
    }
    Ok(found)
}
