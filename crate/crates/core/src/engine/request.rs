use std::fmt;

use serde::{Deserialize, Serialize};
use url::form_urlencoded;
use url::Url;

use crate::model::{HttpMethod, RequestModifier, RequestTemplate};

use super::EngineError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyEncoding {
    None,
    FormUrlencoded,
}

/// A fully resolved HTTP request. Parameters are kept apart from the URL so
/// modifiers can replace them; for GET they become the query string, for POST
/// the form body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequestPlan {
    pub method: HttpMethod,
    pub url: Url,
    pub params: Vec<(String, String)>,
    #[serde(default)]
    pub headers: Vec<(String, String)>,
    pub body_encoding: BodyEncoding,
}

impl HttpRequestPlan {
    /// For GET any query already in `url` moves in front of `params`.
    pub fn new(method: HttpMethod, mut url: Url, params: Vec<(String, String)>) -> Self {
        let mut all = Vec::new();
        if method == HttpMethod::Get {
            all.extend(url.query_pairs().into_owned());
            url.set_query(None);
        }
        all.extend(params);
        let body_encoding = match method {
            HttpMethod::Get => BodyEncoding::None,
            HttpMethod::Post => BodyEncoding::FormUrlencoded,
        };
        Self {
            method,
            url,
            params: all,
            headers: Vec::new(),
            body_encoding,
        }
    }

    pub fn get(url: Url) -> Self {
        Self::new(HttpMethod::Get, url, Vec::new())
    }

    /// The URL actually requested: for GET it carries the parameters.
    pub fn request_url(&self) -> Url {
        let mut url = self.url.clone();
        if self.method == HttpMethod::Get && !self.params.is_empty() {
            url.query_pairs_mut()
                .extend_pairs(self.params.iter().map(|(k, v)| (k.as_str(), v.as_str())));
        }
        url
    }

    pub fn body(&self) -> Option<String> {
        match self.body_encoding {
            BodyEncoding::None => None,
            BodyEncoding::FormUrlencoded => Some(
                form_urlencoded::Serializer::new(String::new())
                    .extend_pairs(self.params.iter().map(|(k, v)| (k.as_str(), v.as_str())))
                    .finish(),
            ),
        }
    }

    pub fn param(&self, name: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, v)| v.as_str())
    }

    /// Replaces the first parameter called `name` (dropping later duplicates)
    /// or appends it.
    pub fn set_param(&mut self, name: &str, value: &str) {
        match self.params.iter().position(|(k, _)| k == name) {
            Some(first) => {
                self.params[first].1 = value.to_string();
                let mut i = 0;
                self.params.retain(|(k, _)| {
                    let keep = i <= first || k != name;
                    i += 1;
                    keep
                });
            }
            None => self.params.push((name.to_string(), value.to_string())),
        }
    }

    pub fn apply(
        &mut self,
        modifier: &RequestModifier,
        keywords: &str,
        page: u32,
    ) -> Result<(), EngineError> {
        match modifier {
            RequestModifier::ParamSet(pairs) => {
                for (k, v) in pairs {
                    self.set_param(k, v);
                }
            }
            RequestModifier::PathSuffix(suffix) => {
                let path = format!("{}{}", self.url.path(), suffix);
                self.url.set_path(&path);
            }
            RequestModifier::UrlOverride(template) => {
                let replaced = expand_url(self.method, template, keywords, page)?;
                self.url = replaced.url;
                self.params = replaced.params;
            }
        }
        Ok(())
    }
}

/// Diagnostic form used by `--dry-run`.
impl fmt::Display for HttpRequestPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.method, self.request_url())?;
        for (k, v) in &self.headers {
            writeln!(f, "  header {k}: {v}")?;
        }
        for (k, v) in &self.params {
            writeln!(f, "  param {k} = {v}")?;
        }
        if let Some(body) = self.body() {
            writeln!(f, "  body {body}")?;
        }
        Ok(())
    }
}

fn substitute(raw: &str, keywords: &str, page: u32) -> String {
    raw.replace("{query}", keywords)
        .replace("{page}", &page.to_string())
}

fn encode_path(keywords: &str) -> String {
    form_urlencoded::byte_serialize(keywords.as_bytes())
        .collect::<String>()
        .replace('+', "%20")
}

fn expand_url(
    method: HttpMethod,
    template: &str,
    keywords: &str,
    page: u32,
) -> Result<HttpRequestPlan, EngineError> {
    let (base, query) = match template.split_once('?') {
        Some((b, q)) => (b, Some(q)),
        None => (template, None),
    };
    let base = base
        .replace("{query}", &encode_path(keywords))
        .replace("{page}", &page.to_string());
    let url = Url::parse(&base)
        .map_err(|e| EngineError::InvalidTemplate(format!("{template:?}: {e}")))?;
    let params = query
        .map(|q| {
            form_urlencoded::parse(q.as_bytes())
                .map(|(k, v)| (substitute(&k, keywords, page), substitute(&v, keywords, page)))
                .collect()
        })
        .unwrap_or_default();
    let mut url = url;
    url.set_query(None);
    Ok(HttpRequestPlan::new(method, url, params))
}

/// Instantiates a request template. Placeholders in the query part are
/// substituted after decoding, so keywords are encoded exactly once.
pub fn expand_template(
    template: &RequestTemplate,
    keywords: &str,
    page: u32,
) -> Result<HttpRequestPlan, EngineError> {
    let mut plan = expand_url(template.method, &template.url_template, keywords, page)?;
    for (k, v) in &template.static_params {
        plan.params
            .push((substitute(k, keywords, page), substitute(v, keywords, page)));
    }
    Ok(plan)
}

pub fn template_has_page(template: &RequestTemplate) -> bool {
    template.url_template.contains("{page}")
        || template
            .static_params
            .iter()
            .any(|(k, v)| k.contains("{page}") || v.contains("{page}"))
}
