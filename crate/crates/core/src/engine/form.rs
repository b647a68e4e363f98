use url::Url;

use crate::dom::{Document, DocumentHandle, NodeId};
use crate::model::{EngineBinding, HttpMethod};
use crate::selector::CompiledSelector;

use super::request::HttpRequestPlan;
use super::EngineError;

/// Parameter names tried, in order, when the bound input has no name.
pub const FALLBACK_PARAM_NAMES: &[&str] = &["q", "query", "search", "s"];

/// Builds the request a browser would send when the bound input is filled
/// with `keywords` and its form submitted.
pub fn derive_form_request(
    doc: &DocumentHandle,
    binding: &EngineBinding,
    keywords: &str,
) -> Result<HttpRequestPlan, EngineError> {
    derive_with_name(doc, binding, keywords, None)
}

/// As [`derive_form_request`], but `name` stands in for a missing (or any)
/// input name.
pub fn derive_with_name(
    doc: &DocumentHandle,
    binding: &EngineBinding,
    keywords: &str,
    name: Option<&str>,
) -> Result<HttpRequestPlan, EngineError> {
    let d = &doc.document;
    let input = bound_input(d, binding)?;
    let input_name = match name {
        Some(n) => n.to_string(),
        None => d
            .attr(input, "name")
            .filter(|n| !n.is_empty())
            .ok_or(EngineError::InputHasNoName)?
            .to_string(),
    };

    let Some(form) = d.ancestors(input).find(|a| d.tag(*a) == Some("form")) else {
        let url = Url::parse(&binding.search_page_url)
            .map_err(|e| EngineError::InvalidTemplate(e.to_string()))?;
        return Ok(HttpRequestPlan::new(
            HttpMethod::Get,
            url,
            vec![(input_name, keywords.to_string())],
        ));
    };

    let method = match d.attr(form, "method").map(str::to_ascii_lowercase) {
        Some(m) if m == "post" => HttpMethod::Post,
        _ => HttpMethod::Get,
    };
    let mut action = match d.attr(form, "action").map(str::trim) {
        Some(a) if !a.is_empty() => doc
            .resolve(a)
            .ok_or_else(|| EngineError::InvalidTemplate(format!("bad form action {a:?}")))?,
        _ => doc.base_url.clone(),
    };
    action.set_fragment(None);
    if method == HttpMethod::Get {
        // a GET submission replaces the action's query string
        action.set_query(None);
    }

    let trigger = binding
        .trigger
        .as_ref()
        .and_then(|t| CompiledSelector::compile(t).ok())
        .and_then(|c| c.first(d, None));

    let mut params = Vec::new();
    for field in d.descendant_elements(form) {
        if field == input {
            params.push((input_name.clone(), keywords.to_string()));
            continue;
        }
        if d.attr(field, "disabled").is_some() {
            continue;
        }
        let Some(name) = d.attr(field, "name").filter(|n| !n.is_empty()) else {
            continue;
        };
        if let Some(value) = field_value(d, field, trigger) {
            params.push((name.to_string(), value));
        }
    }
    Ok(HttpRequestPlan::new(method, action, params))
}

fn bound_input(d: &Document, binding: &EngineBinding) -> Result<NodeId, EngineError> {
    let matches = CompiledSelector::compile(&binding.input)?.select(d, None);
    match matches.as_slice() {
        [] => Err(EngineError::InputNotFound),
        [one] => Ok(*one),
        many => Err(EngineError::AmbiguousInput(many.len())),
    }
}

/// Value a successful form control contributes, if any.
fn field_value(d: &Document, field: NodeId, trigger: Option<NodeId>) -> Option<String> {
    let value = || d.attr(field, "value").unwrap_or_default().to_string();
    match d.tag(field)? {
        "input" => {
            let kind = d.attr(field, "type").unwrap_or("text").to_ascii_lowercase();
            match kind.as_str() {
                "hidden" | "text" | "search" | "email" | "number" | "tel" | "url" => {
                    Some(value())
                }
                "checkbox" | "radio" => d
                    .attr(field, "checked")
                    .map(|_| d.attr(field, "value").unwrap_or("on").to_string()),
                "submit" | "image" => (Some(field) == trigger).then(value),
                _ => None,
            }
        }
        "button" => {
            let kind = d.attr(field, "type").unwrap_or("submit").to_ascii_lowercase();
            (kind == "submit" && Some(field) == trigger).then(value)
        }
        "select" => {
            let options: Vec<NodeId> = d
                .descendant_elements(field)
                .filter(|o| d.tag(*o) == Some("option"))
                .collect();
            let chosen = options
                .iter()
                .find(|o| d.attr(**o, "selected").is_some())
                .or(options.first())?;
            Some(
                d.attr(*chosen, "value")
                    .map(str::to_string)
                    .unwrap_or_else(|| crate::extract::normalize_text(&d.text_content(*chosen))),
            )
        }
        "textarea" => Some(d.text_content(field)),
        _ => None,
    }
}
