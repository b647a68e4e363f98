use std::sync::atomic::{AtomicUsize, Ordering};

use async_trait::async_trait;
use chrono::TimeZone;

use super::*;
use crate::model::*;

const BOOKS: &[(&str, &str)] = &[
    ("Ficciones", "journal"),
    ("El Aleph", "conference"),
    ("Rayuela", "journal"),
    ("Historias de cronopios", "journal"),
    ("Bestiario", "conference"),
];

/// A five-book site with a form page, a paginated result page (two per page)
/// and a fragment endpoint.
struct Site {
    config: FetchConfig,
    calls: AtomicUsize,
}

impl Site {
    fn new() -> Self {
        Self {
            config: FetchConfig::local(),
            calls: AtomicUsize::new(0),
        }
    }

    fn results(&self, url: &Url, params: &[(String, String)]) -> String {
        let get = |k: &str| params.iter().find(|(n, _)| n == k).map(|(_, v)| v.as_str());
        let q = get("q").unwrap_or_default().to_lowercase();
        let page: usize = get("page").and_then(|p| p.parse().ok()).unwrap_or(1);
        let venue = get("venue");
        let hits: Vec<(usize, &str)> = BOOKS
            .iter()
            .enumerate()
            .filter(|(_, (t, v))| t.to_lowercase().contains(&q) && venue.is_none_or(|x| x == *v))
            .map(|(i, (t, _))| (i, *t))
            .collect();
        let items: String = hits
            .iter()
            .skip((page - 1) * 2)
            .take(2)
            .map(|(i, t)| format!("<li class=\"r\"><a href=\"/book/{i}\">{t}</a></li>"))
            .collect();
        let next = if page * 2 < hits.len() {
            let mut u = url.clone();
            u.query_pairs_mut()
                .clear()
                .append_pair("q", &q)
                .append_pair("page", &(page + 1).to_string());
            format!("<a class=\"next\" href=\"{u}\">next</a>")
        } else {
            String::new()
        };
        format!("<ul>{items}</ul>{next}")
    }
}

#[async_trait]
impl Fetcher for Site {
    fn config(&self) -> &FetchConfig {
        &self.config
    }

    async fn fetch(&self, plan: &HttpRequestPlan) -> Result<FetchResponse, FetchError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let url = plan.request_url();
        let body = match url.path() {
            "/" => r#"<html><body><form action="/search"><input name="q">
                  <button id="go" data-endpoint="/frag">Go</button></form></body></html>"#
                .to_string(),
            "/nameless" => r#"<html><body><form action="/search"><input id="k">
                  </form></body></html>"#
                .to_string(),
            "/search" => format!("<html><body>{}</body></html>", self.results(&url, &plan.params)),
            "/frag" => self.results(&url, &plan.params),
            "/api" => {
                let q = plan.param("q").unwrap_or_default().to_lowercase();
                let rows: Vec<_> = BOOKS
                    .iter()
                    .enumerate()
                    .filter(|(_, (t, _))| t.to_lowercase().contains(&q))
                    .map(|(i, (t, _))| serde_json::json!({"name": t, "link": format!("/book/{i}")}))
                    .collect();
                serde_json::json!({"results": rows, "has_next": false}).to_string()
            }
            "/down" => {
                return Ok(FetchResponse {
                    status: 500,
                    final_url: url,
                    body: String::new(),
                    content_type: None,
                })
            }
            _ => {
                return Err(FetchError::Transport {
                    url: url.to_string(),
                    message: "connection refused".into(),
                })
            }
        };
        Ok(FetchResponse {
            status: 200,
            final_url: url,
            body,
            content_type: Some("text/html".into()),
        })
    }
}

fn engine() -> Engine {
    Engine::with_clock(Clock::Fixed(Utc.with_ymd_and_hms(2016, 6, 6, 0, 0, 0).unwrap()))
}

fn spec(strategy: Option<StrategyConfig>) -> ServiceSpec {
    ServiceSpec {
        id: "books".into(),
        name: "Books".into(),
        binding: EngineBinding {
            search_page_url: "http://site.test/".into(),
            input: Selector::css("input"),
            trigger: Some(Selector::css("#go")),
            next_page: Some(Selector::css("a.next")),
            prev_page: None,
            reveal: None,
        },
        strategy,
        result_spec: SearchResultSpec {
            type_name: "Book".into(),
            container: Selector::css("li.r").many(),
            target_url: Some(PropertySpec::in_result(
                "target_url",
                Selector::css("a"),
                Extract::Attribute("href".into()),
            )),
            properties: vec![PropertySpec::in_result("title", Selector::css("a"), Extract::Text)],
        },
        filters: ConditionManager {
            groups: vec![ConditionGroup {
                group_name: "venue".into(),
                exclusive: true,
                conditions: vec![Condition {
                    name: "Journal only".into(),
                    activation: RequestModifier::ParamSet(vec![("venue".into(), "journal".into())]),
                }],
            }],
        },
        orderings: vec![OrderingSpec {
            name: "Title".into(),
            mode: OrderingMode::Local(LocalOrdering {
                property: "title".into(),
                direction: SortDirection::Asc,
                comparator: Comparator::Lexical,
            }),
        }],
        metadata: ServiceMetadata::now(),
    }
}

fn reload() -> Option<StrategyConfig> {
    Some(StrategyConfig {
        variant: StrategyVariant::WriteAndClickToReload,
        request_template: None,
    })
}

fn titles(rs: &crate::extract::ResultSet) -> Vec<String> {
    rs.items
        .iter()
        .map(|o| o.value("title").unwrap_or_default().to_string())
        .collect()
}

#[tokio::test]
async fn reload_paginates_through_next_links() {
    let site = Site::new();
    let e = engine();
    let spec = spec(reload());
    let (rs, cursor) = e.execute(&spec, &SearchQuery::new("e"), &site).await.unwrap();
    assert_eq!(titles(&rs), ["Ficciones", "El Aleph"]);
    assert!(cursor.has_next && !cursor.has_prev);
    let (rs2, c2) = e.next_page(&cursor, &site).await.unwrap();
    assert_eq!(c2.page_index, 2);
    assert_eq!(titles(&rs2), ["Rayuela", "Historias de cronopios"]);
    let (rs3, c3) = e.next_page(&c2, &site).await.unwrap();
    assert_eq!(titles(&rs3), ["Bestiario"]);
    assert!(!c3.has_next);
    assert!(matches!(
        e.next_page(&c3, &site).await,
        Err(EngineError::NoSuchPage(_))
    ));
    let (back, cb) = e.prev_page(&c3, &site).await.unwrap();
    assert_eq!(back, rs2);
    assert_eq!(cb.page_index, 2);
    assert!(matches!(
        e.prev_page(&cursor, &site).await,
        Err(EngineError::NoSuchPage(_))
    ));
    // asking for page 3 directly walks the links
    let (direct, _) = e
        .execute(&spec, &SearchQuery::new("e").at_page(3), &site)
        .await
        .unwrap();
    assert_eq!(direct, rs3);
}

#[tokio::test]
async fn filters_and_local_ordering() {
    let site = Site::new();
    let e = engine();
    let spec = spec(reload());
    let q = SearchQuery::new("i")
        .with_filter("Journal only")
        .with_ordering("Title");
    let (rs, _) = e.execute(&spec, &q, &site).await.unwrap();
    assert_eq!(titles(&rs), ["Ficciones", "Historias de cronopios"]);
    let bad = SearchQuery::new("i").with_filter("Nope");
    assert!(matches!(
        e.execute(&spec, &bad, &site).await,
        Err(EngineError::InvalidQuery(_))
    ));
}

#[tokio::test]
async fn empty_results_and_errors() {
    let site = Site::new();
    let e = engine();
    let (rs, cursor) = e
        .execute(&spec(reload()), &SearchQuery::new("zzz"), &site)
        .await
        .unwrap();
    assert!(rs.items.is_empty());
    assert!(!cursor.has_next);
    assert!(!rs.diagnostics.is_empty());

    assert!(matches!(
        e.execute(&spec(None), &SearchQuery::new("x"), &site).await,
        Err(EngineError::StrategyUnconfigured(_))
    ));

    let mut down = spec(reload());
    down.binding.search_page_url = "http://site.test/down".into();
    let err = e.execute(&down, &SearchQuery::new("x"), &site).await.unwrap_err();
    assert_eq!(err.name(), "fetch-failed");
}

#[tokio::test]
async fn templates_with_page_placeholder() {
    let site = Site::new();
    let e = engine();
    let mut s = spec(Some(StrategyConfig {
        variant: StrategyVariant::WriteAndClickForAjaxCall,
        request_template: Some(RequestTemplate {
            method: HttpMethod::Get,
            url_template: "http://site.test/frag?q={query}&page={page}".into(),
            static_params: vec![],
            response_kind: ResponseKind::HtmlFragment,
        }),
    }));
    s.binding.next_page = None;
    let (rs, cursor) = e
        .execute(&s, &SearchQuery::new("e").at_page(2), &site)
        .await
        .unwrap();
    assert_eq!(titles(&rs), ["Rayuela", "Historias de cronopios"]);
    assert_eq!(cursor.continuation.history.len(), 2);
    let (p3, c3) = e.next_page(&cursor, &site).await.unwrap();
    assert_eq!(titles(&p3), ["Bestiario"]);
    // no next control: the template keeps offering pages until one is empty
    assert!(c3.has_next);
    let (p4, c4) = e.next_page(&c3, &site).await.unwrap();
    assert!(p4.items.is_empty());
    assert!(!c4.has_next);
}

#[tokio::test]
async fn detection_order_and_fallback_names() {
    let site = Site::new();
    let e = engine();
    let config = e
        .detect_strategy(&spec(None), ("Ficciones", "Rayuela"), &site, &DetectOptions::default())
        .await
        .unwrap();
    assert_eq!(config.variant, StrategyVariant::WriteAndClickToReload);
    let t = config.request_template.unwrap();
    assert_eq!(t.url_template, "http://site.test/search");
    assert_eq!(t.static_params, vec![("q".to_string(), "{query}".to_string())]);

    let mut nameless = spec(None);
    nameless.binding.search_page_url = "http://site.test/nameless".into();
    nameless.binding.trigger = None;
    let config = e
        .detect_strategy(&nameless, ("Ficciones", "Rayuela"), &site, &DetectOptions::default())
        .await
        .unwrap();
    assert_eq!(
        config.request_template.as_ref().unwrap().static_params[0].0,
        "q"
    );
    // the detected template makes the spec executable although the input has no name
    nameless.strategy = Some(config);
    let (rs, _) = e
        .execute(&nameless, &SearchQuery::new("Rayuela"), &site)
        .await
        .unwrap();
    assert_eq!(titles(&rs), ["Rayuela"]);

    assert!(matches!(
        e.detect_strategy(&spec(None), ("a", "a"), &site, &DetectOptions::default())
            .await,
        Err(EngineError::InvalidQuery(_))
    ));
}

#[tokio::test]
async fn nothing_applicable() {
    let site = Site::new();
    let e = engine();
    let mut s = spec(None);
    s.result_spec.container = Selector::css("li.never").many();
    let err = e
        .detect_strategy(&s, ("Ficciones", "Rayuela"), &site, &DetectOptions::default())
        .await
        .unwrap_err();
    match err {
        EngineError::NoApplicableStrategy(attempts) => {
            assert!(attempts.iter().any(|a| a.starts_with("write_and_click_to_reload")));
            assert!(attempts.iter().any(|a| a.starts_with("write_and_click_for_ajax_call")));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[tokio::test]
async fn providers() {
    let site = Site::new();
    let e = engine();
    let provider = Arc::new(JsonApiProvider::new(
        Url::parse("http://site.test/api").unwrap(),
        "link",
        &[("title", "name")],
    ));
    e.register_provider("books-api", provider.clone()).unwrap();
    assert!(matches!(
        e.register_provider("books-api", provider),
        Err(EngineError::DuplicateProvider(_))
    ));
    let api = spec(Some(StrategyConfig {
        variant: StrategyVariant::ApiBased {
            provider_id: "books-api".into(),
        },
        request_template: None,
    }));
    let (rs, cursor) = e.execute(&api, &SearchQuery::new("e"), &site).await.unwrap();
    assert_eq!(rs.items.len(), 5);
    assert!(!cursor.has_next);
    let (html, _) = e
        .execute(&spec(reload()), &SearchQuery::new("e"), &site)
        .await
        .unwrap();
    for (a, b) in html.items.iter().zip(&rs.items) {
        assert_eq!(a.target_url, b.target_url);
        assert_eq!(a.values, b.values);
    }

    let mut missing = api.clone();
    missing.strategy = Some(StrategyConfig {
        variant: StrategyVariant::ApiBased {
            provider_id: "nope".into(),
        },
        request_template: None,
    });
    assert!(matches!(
        e.execute(&missing, &SearchQuery::new("e"), &site).await,
        Err(EngineError::StrategyUnconfigured(_))
    ));
}

#[tokio::test]
async fn execution_is_deterministic_and_leaves_spec_alone() {
    let site = Site::new();
    let e = engine();
    let s = spec(reload());
    let before = s.clone();
    let a = e.execute(&s, &SearchQuery::new("e"), &site).await.unwrap();
    let b = e.execute(&s, &SearchQuery::new("e"), &site).await.unwrap();
    assert_eq!(a, b);
    assert_eq!(s, before);
}
