//! Structural validation of service specs.
//!
//! `validate_spec` never fails; every problem lands in the report with the
//! dotted path of the offending field.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use url::Url;

use crate::model::*;
use crate::selector::CompiledSelector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(Issue {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }

    /// One line per issue, errors first.
    pub fn summary(&self) -> String {
        let mut lines: Vec<String> = self
            .errors()
            .chain(self.warnings())
            .map(|i| {
                let sev = match i.severity {
                    Severity::Error => "error",
                    Severity::Warning => "warning",
                };
                format!("{sev}: {}: {}", i.path, i.message)
            })
            .collect();
        lines.dedup();
        lines.join("\n")
    }
}

pub fn validate_spec(spec: &ServiceSpec) -> ValidationReport {
    let mut r = ValidationReport::default();

    if spec.id.trim().is_empty() {
        r.error("id", "must not be empty");
    }
    if spec.name.trim().is_empty() {
        r.error("name", "must not be empty");
    }
    if spec.metadata.format_version != FORMAT_VERSION {
        r.error(
            "metadata.format_version",
            format!(
                "unsupported version {:?}, expected {FORMAT_VERSION:?}",
                spec.metadata.format_version
            ),
        );
    }

    check_binding(&mut r, &spec.binding);
    check_strategy(&mut r, spec.strategy.as_ref());
    check_result_spec(&mut r, &spec.result_spec);
    check_filters(&mut r, &spec.filters);
    check_orderings(&mut r, &spec.orderings, &spec.result_spec);
    r
}

fn check_selector(r: &mut ValidationReport, path: &str, s: &Selector) {
    if s.expression.trim().is_empty() {
        r.error(format!("{path}.expression"), "selector expression is empty");
        return;
    }
    if let Err(e) = CompiledSelector::compile(s) {
        r.error(format!("{path}.expression"), e.to_string());
    }
}

fn check_unique_selector(r: &mut ValidationReport, path: &str, s: &Selector) {
    check_selector(r, path, s);
    if s.expect_many {
        r.error(
            format!("{path}.expect_many"),
            "this control must be a single element (expect_many=false)",
        );
    }
}

fn check_binding(r: &mut ValidationReport, b: &EngineBinding) {
    match Url::parse(&b.search_page_url) {
        Ok(u) if matches!(u.scheme(), "http" | "https") => {}
        Ok(u) => r.error(
            "binding.search_page_url",
            format!("scheme {:?} is not http or https", u.scheme()),
        ),
        Err(e) => r.error(
            "binding.search_page_url",
            format!("not an absolute URL: {e}"),
        ),
    }
    check_unique_selector(r, "binding.input", &b.input);
    match &b.trigger {
        Some(t) => check_unique_selector(r, "binding.trigger", t),
        None => r.warn(
            "binding.trigger",
            "no trigger; only keystroke-driven or form-submit execution is possible",
        ),
    }
    match &b.next_page {
        Some(s) => check_unique_selector(r, "binding.next_page", s),
        None => r.warn("binding.next_page", "no pagination control; only page 1 is reachable unless the request template has {page}"),
    }
    if let Some(s) = &b.prev_page {
        check_unique_selector(r, "binding.prev_page", s);
    }
    if let Some(s) = &b.reveal {
        check_unique_selector(r, "binding.reveal", s);
    }
}

fn check_template(r: &mut ValidationReport, path: &str, template: &str, require_query: bool) {
    match template_placeholders(template) {
        Ok(found) => {
            if require_query && !found.contains(&"query") {
                r.error(path, "template must contain {query}");
            }
        }
        Err(e) => r.error(path, e),
    }
}

fn check_strategy(r: &mut ValidationReport, s: Option<&StrategyConfig>) {
    let Some(s) = s else {
        r.warn("strategy", "no execution strategy yet; run strategy detection");
        return;
    };
    match (&s.variant, &s.request_template) {
        (StrategyVariant::ApiBased { provider_id }, _) => {
            if provider_id.trim().is_empty() {
                r.error("strategy.variant.api_based.provider_id", "must not be empty");
            }
        }
        (_, None) => r.error(
            "strategy.request_template",
            "required for every variant except api_based",
        ),
        (_, Some(t)) => {
            // the query may travel in the URL or in a (body) parameter
            let in_params = t
                .static_params
                .iter()
                .any(|(_, v)| template_placeholders(v).is_ok_and(|f| f.contains(&"query")));
            check_template(
                r,
                "strategy.request_template.url_template",
                &t.url_template,
                !in_params,
            );
            let probe = t
                .url_template
                .replace("{query}", "q")
                .replace("{page}", "1");
            match Url::parse(&probe) {
                Ok(u) if matches!(u.scheme(), "http" | "https") => {}
                _ => r.error(
                    "strategy.request_template.url_template",
                    "must be an absolute http(s) URL",
                ),
            }
            for (i, (name, value)) in t.static_params.iter().enumerate() {
                let path = format!("strategy.request_template.static_params[{i}]");
                if name.is_empty() {
                    r.error(&path, "parameter name is empty");
                }
                check_template(r, &path, value, false);
            }
        }
    }
}

fn check_property(r: &mut ValidationReport, path: &str, p: &PropertySpec) {
    if p.name.trim().is_empty() {
        r.error(format!("{path}.name"), "must not be empty");
    }
    check_selector(r, &format!("{path}.selector"), &p.selector);
    if let Extract::Attribute(a) = &p.extract {
        if a.trim().is_empty() {
            r.error(format!("{path}.extract.attribute"), "attribute name is empty");
        }
    }
}

fn check_result_spec(r: &mut ValidationReport, s: &SearchResultSpec) {
    if s.type_name.trim().is_empty() {
        r.error("result_spec.type_name", "must not be empty");
    }
    check_selector(r, "result_spec.container", &s.container);
    if !s.container.expect_many {
        r.error(
            "result_spec.container.expect_many",
            "the result container must match many elements (expect_many=true)",
        );
    }
    match &s.target_url {
        None => r.error(
            "result_spec.target_url",
            "target_url is mandatory for every result spec",
        ),
        Some(t) => {
            check_property(r, "result_spec.target_url", t);
            if !matches!(t.extract, Extract::Attribute(_)) {
                r.error(
                    "result_spec.target_url.extract",
                    "target_url must extract an attribute (e.g. href)",
                );
            }
            if t.location != PropertyLocation::InResult {
                r.error(
                    "result_spec.target_url.location",
                    "target_url is read from the result itself (in_result)",
                );
            }
        }
    }
    if s.properties.is_empty() {
        r.error("result_spec.properties", "at least one property is required");
    }
    let mut seen = HashSet::new();
    for (i, p) in s.properties.iter().enumerate() {
        let path = format!("result_spec.properties[{i}]");
        check_property(r, &path, p);
        if !seen.insert(p.name.as_str()) {
            r.error(format!("{path}.name"), format!("duplicate property name {:?}", p.name));
        }
        if p.location == PropertyLocation::InTarget && s.target_url.is_none() {
            r.error(
                format!("{path}.location"),
                "in_target properties need a target_url",
            );
        }
    }
}

fn check_modifier(r: &mut ValidationReport, path: &str, m: &RequestModifier) {
    match m {
        RequestModifier::UrlOverride(t) => {
            check_template(r, &format!("{path}.url_override"), t, false);
            let probe = t.replace("{query}", "q").replace("{page}", "1");
            if Url::parse(&probe).is_err() {
                r.error(format!("{path}.url_override"), "must be an absolute URL");
            }
        }
        RequestModifier::ParamSet(params) => {
            if params.is_empty() {
                r.error(format!("{path}.param_set"), "must set at least one parameter");
            }
            for (name, value) in params {
                if name.is_empty() {
                    r.error(format!("{path}.param_set"), "parameter name is empty");
                }
                check_template(r, &format!("{path}.param_set"), value, false);
            }
        }
        RequestModifier::PathSuffix(s) => {
            if s.is_empty() {
                r.error(format!("{path}.path_suffix"), "must not be empty");
            }
            check_template(r, &format!("{path}.path_suffix"), s, false);
        }
    }
}

fn check_filters(r: &mut ValidationReport, m: &ConditionManager) {
    let mut names = HashSet::new();
    for (gi, g) in m.groups.iter().enumerate() {
        for (ci, c) in g.conditions.iter().enumerate() {
            let path = format!("filters.groups[{gi}].conditions[{ci}]");
            if c.name.trim().is_empty() {
                r.error(format!("{path}.name"), "must not be empty");
            }
            if !names.insert(c.name.as_str()) {
                r.error(format!("{path}.name"), format!("duplicate condition {:?}", c.name));
            }
            check_modifier(r, &format!("{path}.activation"), &c.activation);
        }
    }
}

fn check_orderings(r: &mut ValidationReport, orderings: &[OrderingSpec], s: &SearchResultSpec) {
    let mut names = HashSet::new();
    for (i, o) in orderings.iter().enumerate() {
        let path = format!("orderings[{i}]");
        if !names.insert(o.name.as_str()) {
            r.error(format!("{path}.name"), format!("duplicate ordering {:?}", o.name));
        }
        match &o.mode {
            OrderingMode::Remote(m) => check_modifier(r, &format!("{path}.mode.remote"), m),
            OrderingMode::Local(l) => {
                if s.property(&l.property).is_none() {
                    r.error(
                        format!("{path}.mode.local.property"),
                        format!("unknown property {:?}", l.property),
                    );
                }
            }
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    pub(crate) fn minimal_spec() -> ServiceSpec {
        ServiceSpec {
            id: "books".into(),
            name: "Books".into(),
            binding: EngineBinding {
                search_page_url: "http://books.test/".into(),
                input: Selector::css("input[name=q]"),
                trigger: None,
                next_page: None,
                prev_page: None,
                reveal: None,
            },
            strategy: None,
            result_spec: SearchResultSpec {
                type_name: "Book".into(),
                container: Selector::css("li.result").many(),
                target_url: Some(PropertySpec::in_result(
                    "target_url",
                    Selector::css("a"),
                    Extract::Attribute("href".into()),
                )),
                properties: vec![PropertySpec::in_result(
                    "title",
                    Selector::css("a"),
                    Extract::Text,
                )],
            },
            filters: ConditionManager::default(),
            orderings: Vec::new(),
            metadata: ServiceMetadata {
                tags: vec![],
                created: Utc.with_ymd_and_hms(2016, 6, 6, 0, 0, 0).unwrap(),
                format_version: "1".into(),
            },
        }
    }

    #[test]
    fn minimal_spec_has_no_errors() {
        let r = validate_spec(&minimal_spec());
        assert!(r.is_valid(), "{}", r.summary());
        // missing trigger, pagination and strategy are warnings only
        assert_eq!(r.warnings().count(), 3);
    }

    #[test]
    fn missing_target_url_is_an_error() {
        let mut s = minimal_spec();
        s.result_spec.target_url = None;
        let r = validate_spec(&s);
        assert!(r.errors().any(|i| i.path == "result_spec.target_url"));
    }

    #[test]
    fn dangling_local_ordering() {
        let mut s = minimal_spec();
        s.orderings.push(OrderingSpec {
            name: "Cheapest".into(),
            mode: OrderingMode::Local(LocalOrdering {
                property: "price".into(),
                direction: SortDirection::Asc,
                comparator: Comparator::Numeric,
            }),
        });
        let r = validate_spec(&s);
        assert!(r.errors().any(|i| i.message.contains("price")));
    }

    #[test]
    fn selector_and_url_problems() {
        let mut s = minimal_spec();
        s.binding.search_page_url = "ftp://x/".into();
        s.binding.input = Selector::css("input[").many();
        s.result_spec.container.expect_many = false;
        s.result_spec.properties.push(s.result_spec.properties[0].clone());
        let r = validate_spec(&s);
        let paths: Vec<&str> = r.errors().map(|i| i.path.as_str()).collect();
        for p in [
            "binding.search_page_url",
            "binding.input.expression",
            "binding.input.expect_many",
            "result_spec.container.expect_many",
            "result_spec.properties[1].name",
        ] {
            assert!(paths.contains(&p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn strategy_template_rules() {
        let mut s = minimal_spec();
        s.strategy = Some(StrategyConfig {
            variant: StrategyVariant::WriteForAjaxCall,
            request_template: Some(RequestTemplate {
                method: HttpMethod::Get,
                url_template: "http://books.test/api?p={page}&x={user}".into(),
                static_params: vec![],
                response_kind: ResponseKind::HtmlFragment,
            }),
        });
        let r = validate_spec(&s);
        assert!(r
            .errors()
            .any(|i| i.path == "strategy.request_template.url_template"));

        s.strategy = Some(StrategyConfig {
            variant: StrategyVariant::WriteAndClickToReload,
            request_template: None,
        });
        assert!(!validate_spec(&s).is_valid());

        s.strategy = Some(StrategyConfig {
            variant: StrategyVariant::ApiBased {
                provider_id: "jsonapi".into(),
            },
            request_template: None,
        });
        assert!(validate_spec(&s).is_valid());
    }

    #[test]
    fn duplicate_conditions() {
        let mut s = minimal_spec();
        let cond = Condition {
            name: "Journal only".into(),
            activation: RequestModifier::ParamSet(vec![("venue".into(), "journal".into())]),
        };
        s.filters.groups.push(ConditionGroup {
            group_name: "Venue".into(),
            exclusive: true,
            conditions: vec![cond.clone(), cond],
        });
        assert!(!validate_spec(&s).is_valid());
    }
}
