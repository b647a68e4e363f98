use url::Url;

use crate::dom::{DocumentHandle, NodeId};
use crate::extract::extract_results;
use crate::model::{
    HttpMethod, RequestTemplate, ResponseKind, ServiceSpec, StrategyConfig, StrategyVariant,
};
use crate::selector::CompiledSelector;

use super::fetch::Fetcher;
use super::form::{derive_with_name, FALLBACK_PARAM_NAMES};
use super::request::{expand_template, HttpRequestPlan};
use super::{Engine, EngineError};

/// Attributes that name an endpoint a control talks to.
const ENDPOINT_ATTRIBUTES: &[(&str, HttpMethod)] = &[
    ("data-endpoint", HttpMethod::Get),
    ("data-url", HttpMethod::Get),
    ("hx-get", HttpMethod::Get),
    ("hx-post", HttpMethod::Post),
];

const QUERY_MARK: &str = "{query}";

#[derive(Debug, Clone, Default)]
pub struct DetectOptions {
    /// Templates recorded while defining the service (for example by watching
    /// the requests the page issued). Tried after discovered endpoints.
    pub recorded_templates: Vec<RequestTemplate>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetectionAttempt {
    pub variant: &'static str,
    pub request: String,
    pub outcome: String,
}

impl std::fmt::Display for DetectionAttempt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} via {}: {}", self.variant, self.request, self.outcome)
    }
}

struct Candidate {
    variant: StrategyVariant,
    template: RequestTemplate,
}

impl Engine {
    /// Finds the first strategy, in the order reload, click-ajax,
    /// keystroke-ajax, under which both probes return results and the two
    /// result sets differ.
    pub async fn detect_strategy(
        &self,
        draft: &ServiceSpec,
        probes: (&str, &str),
        fetcher: &dyn Fetcher,
        options: &DetectOptions,
    ) -> Result<StrategyConfig, EngineError> {
        let (a, b) = probes;
        if a.trim() == b.trim() {
            return Err(EngineError::InvalidQuery(
                "the two probes must be distinct".into(),
            ));
        }
        let page_url = Url::parse(&draft.binding.search_page_url)
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
        let doc = DocumentHandle::parse(&response.body, response.final_url.clone());
        let candidates = candidates(&doc, draft, options)?;

        let mut attempts = Vec::new();
        for candidate in candidates {
            let mut outcome = Vec::new();
            let mut kind = ResponseKind::FullDocument;
            for probe in [a, b] {
                match self.probe(draft, &candidate.template, probe, fetcher).await {
                    Ok((urls, k)) => {
                        kind = k;
                        outcome.push(Ok(urls))
                    }
                    Err(e) => outcome.push(Err(e)),
                }
            }
            let verdict = match (&outcome[0], &outcome[1]) {
                (Ok(x), Ok(y)) if x.is_empty() || y.is_empty() => {
                    format!("{} and {} results", x.len(), y.len())
                }
                (Ok(x), Ok(y)) if x == y => "both probes returned the same results".into(),
                (Ok(_), Ok(_)) => String::new(),
                (Err(e), _) | (_, Err(e)) => e.clone(),
            };
            if verdict.is_empty() {
                let mut template = candidate.template;
                template.response_kind = kind;
                return Ok(StrategyConfig {
                    variant: candidate.variant,
                    request_template: Some(template),
                });
            }
            attempts.push(
                DetectionAttempt {
                    variant: candidate.variant.name(),
                    request: candidate.template.url_template.clone(),
                    outcome: verdict,
                }
                .to_string(),
            );
        }
        if attempts.is_empty() {
            attempts.push("no form, endpoint or recorded template to try".into());
        }
        Err(EngineError::NoApplicableStrategy(attempts))
    }

    /// Sorted target URLs extracted for `keywords`, and the response shape.
    async fn probe(
        &self,
        draft: &ServiceSpec,
        template: &RequestTemplate,
        keywords: &str,
        fetcher: &dyn Fetcher,
    ) -> Result<(Vec<String>, ResponseKind), String> {
        let plan = expand_template(template, keywords, 1).map_err(|e| e.to_string())?;
        let response = fetcher.fetch(&plan).await.map_err(|e| e.to_string())?;
        if response.status >= 400 {
            return Err(format!("HTTP status {}", response.status));
        }
        let kind = if response.body.to_ascii_lowercase().contains("<html") {
            ResponseKind::FullDocument
        } else {
            ResponseKind::HtmlFragment
        };
        let doc = DocumentHandle::parse(&response.body, response.final_url);
        let extraction = extract_results(&doc, &draft.result_spec, &doc.base_url, self.clock.now())
            .map_err(|e| e.to_string())?;
        let mut urls: Vec<String> = extraction.objects.into_iter().map(|o| o.target_url).collect();
        urls.sort();
        Ok((urls, kind))
    }
}

fn candidates(
    doc: &DocumentHandle,
    draft: &ServiceSpec,
    options: &DetectOptions,
) -> Result<Vec<Candidate>, EngineError> {
    let d = &doc.document;
    let binding = &draft.binding;
    let input = match CompiledSelector::compile(&binding.input)?
        .select(d, None)
        .as_slice()
    {
        [] => return Err(EngineError::InputNotFound),
        [one] => *one,
        many => return Err(EngineError::AmbiguousInput(many.len())),
    };
    let names: Vec<String> = match d.attr(input, "name").filter(|n| !n.is_empty()) {
        Some(n) => vec![n.to_string()],
        None => FALLBACK_PARAM_NAMES.iter().map(|n| n.to_string()).collect(),
    };
    let trigger = match &binding.trigger {
        Some(t) => CompiledSelector::compile(t)?.first(d, None),
        None => None,
    };

    let mut out = Vec::new();
    for name in &names {
        if let Ok(plan) = derive_with_name(doc, binding, QUERY_MARK, Some(name)) {
            out.push(Candidate {
                variant: StrategyVariant::WriteAndClickToReload,
                template: template_from_plan(&plan, ResponseKind::FullDocument),
            });
        }
    }

    let mut ajax = |variant: StrategyVariant, controls: &[NodeId]| {
        for control in controls {
            for (attr, method) in ENDPOINT_ATTRIBUTES {
                let Some(endpoint) = d.attr(*control, attr).and_then(|e| doc.resolve(e)) else {
                    continue;
                };
                let raw = endpoint.as_str().replace("%7Bquery%7D", QUERY_MARK);
                for name in &names {
                    let static_params = if raw.contains(QUERY_MARK) {
                        Vec::new()
                    } else {
                        vec![(name.clone(), QUERY_MARK.to_string())]
                    };
                    out.push(Candidate {
                        variant: variant.clone(),
                        template: RequestTemplate {
                            method: *method,
                            url_template: raw.clone(),
                            static_params,
                            response_kind: ResponseKind::HtmlFragment,
                        },
                    });
                }
            }
        }
    };
    if let Some(t) = trigger {
        ajax(StrategyVariant::WriteAndClickForAjaxCall, &[t, input]);
    }
    ajax(StrategyVariant::WriteForAjaxCall, &[input]);

    let recorded_variant = if trigger.is_some() {
        StrategyVariant::WriteAndClickForAjaxCall
    } else {
        StrategyVariant::WriteForAjaxCall
    };
    // recorded templates go after the discovered ones of the same variant
    let rank = |v: &StrategyVariant| match v {
        StrategyVariant::WriteAndClickToReload => 0,
        StrategyVariant::WriteAndClickForAjaxCall => 1,
        _ => 2,
    };
    let insert_at = out
        .iter()
        .rposition(|c| rank(&c.variant) <= rank(&recorded_variant))
        .map_or(0, |i| i + 1);
    for (offset, t) in options.recorded_templates.iter().enumerate() {
        out.insert(
            insert_at + offset,
            Candidate {
                variant: recorded_variant.clone(),
                template: t.clone(),
            },
        );
    }
    Ok(out)
}

/// Template reproducing a plan derived with the `{query}` marker as keywords.
fn template_from_plan(plan: &HttpRequestPlan, kind: ResponseKind) -> RequestTemplate {
    let url = plan.url.as_str().replace("%7Bquery%7D", QUERY_MARK);
    RequestTemplate {
        method: plan.method,
        url_template: url,
        static_params: plan.params.clone(),
        response_kind: kind,
    }
}
