//! Service definitions for the fixture engines.

use std::sync::Arc;

use chrono::{TimeZone, Utc};
use searchsvc_core::engine::JsonApiProvider;
use searchsvc_core::model::*;
use url::Url;

use crate::dataset::{SortKey, VenueKind};

pub const FORM_ID: &str = "goodreads-fixture";
pub const AJAX_ID: &str = "ajax-fixture";
pub const KEYSTROKE_ID: &str = "keystroke-fixture";
pub const SCROLL_ID: &str = "scroll-fixture";
pub const JSONAPI_ID: &str = "jsonapi-fixture";
pub const PROVIDER_ID: &str = "fixture-json";

pub const JOURNAL_ONLY: &str = "Journal only";
pub const CONFERENCE_ONLY: &str = "Conference only";
pub const BY_RATING: &str = "By rating";
pub const BY_YEAR: &str = "By year";
pub const TITLE_AZ: &str = "Title A-Z";

/// The fixture engines as seen by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    FormReload,
    AjaxFragment,
    KeystrokeAjax,
    InfiniteScroll,
}

impl EngineMode {
    pub const ALL: [EngineMode; 4] = [
        EngineMode::FormReload,
        EngineMode::AjaxFragment,
        EngineMode::KeystrokeAjax,
        EngineMode::InfiniteScroll,
    ];

    pub fn path(self) -> &'static str {
        match self {
            EngineMode::FormReload => "form/",
            EngineMode::AjaxFragment => "ajax/",
            EngineMode::KeystrokeAjax => "keystroke/",
            EngineMode::InfiniteScroll => "scroll/",
        }
    }

    pub fn id(self) -> &'static str {
        match self {
            EngineMode::FormReload => FORM_ID,
            EngineMode::AjaxFragment => AJAX_ID,
            EngineMode::KeystrokeAjax => KEYSTROKE_ID,
            EngineMode::InfiniteScroll => SCROLL_ID,
        }
    }

    /// The strategy detection should settle on; `None` when it cannot.
    pub fn expected_variant(self) -> Option<StrategyVariant> {
        match self {
            EngineMode::FormReload => Some(StrategyVariant::WriteAndClickToReload),
            EngineMode::AjaxFragment => Some(StrategyVariant::WriteAndClickForAjaxCall),
            EngineMode::KeystrokeAjax => Some(StrategyVariant::WriteForAjaxCall),
            EngineMode::InfiniteScroll => None,
        }
    }
}

fn book_results() -> SearchResultSpec {
    let text = |name: &str, css: &str| PropertySpec::in_result(name, Selector::css(css), Extract::Text);
    SearchResultSpec {
        type_name: "Book".into(),
        container: Selector::css("li.result").many(),
        target_url: Some(PropertySpec::in_result(
            "target_url",
            Selector::css("a.title"),
            Extract::Attribute("href".into()),
        )),
        properties: vec![
            text("title", "a.title"),
            text("author", ".author"),
            text("rating", ".rating"),
            text("venue", ".venue"),
            text("year", ".year"),
            PropertySpec::in_target("bibtex", Selector::css("pre.bibtex"), Extract::Text),
        ],
    }
}

fn venue_filters() -> ConditionManager {
    let condition = |name: &str, venue: VenueKind| Condition {
        name: name.into(),
        activation: RequestModifier::ParamSet(vec![("venue".into(), venue.as_str().into())]),
    };
    ConditionManager {
        groups: vec![ConditionGroup {
            group_name: "venue".into(),
            exclusive: true,
            conditions: vec![
                condition(JOURNAL_ONLY, VenueKind::Journal),
                condition(CONFERENCE_ONLY, VenueKind::Conference),
            ],
        }],
    }
}

fn orderings() -> Vec<OrderingSpec> {
    let remote = |name: &str, key: SortKey| OrderingSpec {
        name: name.into(),
        mode: OrderingMode::Remote(RequestModifier::ParamSet(vec![(
            "sort".into(),
            key.as_str().into(),
        )])),
    };
    vec![
        remote(BY_RATING, SortKey::Rating),
        remote(BY_YEAR, SortKey::Year),
        OrderingSpec {
            name: TITLE_AZ.into(),
            mode: OrderingMode::Local(LocalOrdering {
                property: "title".into(),
                direction: SortDirection::Asc,
                comparator: Comparator::Lexical,
            }),
        },
    ]
}

fn metadata() -> ServiceMetadata {
    ServiceMetadata {
        tags: vec!["fixture".into(), "books".into()],
        created: Utc.with_ymd_and_hms(2016, 6, 6, 0, 0, 0).unwrap(),
        format_version: FORMAT_VERSION.into(),
    }
}

/// A service for `mode` with no strategy yet, as a user would leave it
/// before detection.
pub fn draft(base: &Url, mode: EngineMode) -> ServiceSpec {
    let page = base.join(mode.path()).expect("engine path joins");
    let (input, trigger) = match mode {
        EngineMode::FormReload => ("input[name=q]", Some("form#search button")),
        EngineMode::AjaxFragment => ("input[name=q]", Some("button#go")),
        EngineMode::KeystrokeAjax => ("input[name=q]", None),
        EngineMode::InfiniteScroll => ("input[name=q]", Some("form button")),
    };
    let paginated = mode != EngineMode::InfiniteScroll;
    ServiceSpec {
        id: mode.id().into(),
        name: match mode {
            EngineMode::FormReload => "Books (form)",
            EngineMode::AjaxFragment => "Books (ajax)",
            EngineMode::KeystrokeAjax => "Books (instant)",
            EngineMode::InfiniteScroll => "Books (feed)",
        }
        .into(),
        binding: EngineBinding {
            search_page_url: page.to_string(),
            input: Selector::css(input),
            trigger: trigger.map(Selector::css),
            next_page: paginated.then(|| Selector::css("nav.pager a.next")),
            prev_page: paginated.then(|| Selector::css("nav.pager a.prev")),
            reveal: None,
        },
        strategy: None,
        result_spec: book_results(),
        filters: venue_filters(),
        orderings: orderings(),
        metadata: metadata(),
    }
}

fn template(url: Url, method: HttpMethod, kind: ResponseKind, extra: &[(&str, &str)]) -> RequestTemplate {
    let mut static_params: Vec<(String, String)> = extra
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    static_params.push(("q".into(), "{query}".into()));
    RequestTemplate {
        method,
        url_template: url.to_string(),
        static_params,
        response_kind: kind,
    }
}

/// Ready-to-run services for every engine that supports one, plus the JSON
/// API service. Strategies match what detection finds.
pub fn installed(base: &Url) -> Vec<ServiceSpec> {
    let mut out = Vec::new();
    for mode in [
        EngineMode::FormReload,
        EngineMode::AjaxFragment,
        EngineMode::KeystrokeAjax,
    ] {
        let mut spec = draft(base, mode);
        let strategy = match mode {
            EngineMode::FormReload => StrategyConfig {
                variant: StrategyVariant::WriteAndClickToReload,
                request_template: Some(template(
                    base.join("form/search").unwrap(),
                    HttpMethod::Get,
                    ResponseKind::FullDocument,
                    &[("ref", "home")],
                )),
            },
            _ => StrategyConfig {
                variant: mode.expected_variant().expect("supported mode"),
                request_template: Some(template(
                    base.join("api/search").unwrap(),
                    HttpMethod::Get,
                    ResponseKind::HtmlFragment,
                    &[],
                )),
            },
        };
        spec.strategy = Some(strategy);
        out.push(spec);
    }
    out.push(api_spec(base));
    out
}

pub fn api_spec(base: &Url) -> ServiceSpec {
    let mut spec = draft(base, EngineMode::FormReload);
    spec.id = JSONAPI_ID.into();
    spec.name = "Books (JSON API)".into();
    spec.binding.trigger = None;
    spec.binding.next_page = None;
    spec.binding.prev_page = None;
    spec.strategy = Some(StrategyConfig {
        variant: StrategyVariant::ApiBased {
            provider_id: PROVIDER_ID.into(),
        },
        request_template: None,
    });
    spec
}

/// Reference provider for the `/jsonapi` endpoint.
pub fn json_provider(base: &Url) -> Arc<JsonApiProvider> {
    Arc::new(JsonApiProvider::new(
        base.join("jsonapi").expect("path joins"),
        "url",
        &[
            ("title", "title"),
            ("author", "author"),
            ("rating", "rating"),
            ("venue", "venue"),
            ("year", "year"),
        ],
    ))
}
