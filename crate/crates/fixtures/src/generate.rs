//! Random valid service specs for round-trip testing.

use chrono::{TimeZone, Utc};
use proptest::collection::vec;
use proptest::option;
use proptest::prelude::*;
use searchsvc_core::model::*;

/// Free text without template braces; any other Unicode is fair game.
fn text() -> impl Strategy<Value = String> {
    "[^{}]{0,12}"
}

fn label(prefix: &'static str) -> impl Strategy<Value = String> {
    text().prop_map(move |t| format!("{prefix}{t}"))
}

fn selector() -> impl Strategy<Value = Selector> {
    prop_oneof![
        prop::sample::select(vec![
            "input[name=q]",
            "#search > input",
            "form button",
            "a.next",
            "div.results li:nth-child(2)",
            "span[data-x^='a b']",
        ])
        .prop_map(Selector::css),
        prop::sample::select(vec![
            "//input[@name='q']",
            "//a[contains(@class,'next')]",
            "//ul/li[2]/span",
            "//*[@id='go']",
        ])
        .prop_map(Selector::xpath),
    ]
}

fn extract() -> impl Strategy<Value = Extract> {
    prop_oneof![
        Just(Extract::Text),
        Just(Extract::InnerHtml),
        prop::sample::select(vec!["href", "src", "data-id", "title"])
            .prop_map(|a| Extract::Attribute(a.to_string())),
    ]
}

fn params() -> impl Strategy<Value = Vec<(String, String)>> {
    vec(("[a-z_]{1,6}", text()), 1..3)
}

fn modifier() -> impl Strategy<Value = RequestModifier> {
    prop_oneof![
        "[a-z]{1,8}".prop_map(|p| RequestModifier::UrlOverride(format!(
            "https://example.org/{p}?q={{query}}"
        ))),
        params().prop_map(RequestModifier::ParamSet),
        "[a-z/]{1,8}".prop_map(RequestModifier::PathSuffix),
    ]
}

fn variant() -> impl Strategy<Value = StrategyVariant> {
    prop_oneof![
        Just(StrategyVariant::WriteAndClickToReload),
        Just(StrategyVariant::WriteAndClickForAjaxCall),
        Just(StrategyVariant::WriteForAjaxCall),
        "[a-z-]{1,10}".prop_map(|provider_id| StrategyVariant::ApiBased { provider_id }),
    ]
}

fn strategy() -> impl Strategy<Value = StrategyConfig> {
    (
        variant(),
        any::<bool>(),
        "[a-z]{1,8}",
        any::<bool>(),
        vec(("[a-z]{1,5}", text()), 0..3),
        any::<bool>(),
    )
        .prop_map(|(variant, post, path, paged, static_params, fragment)| {
            let api = matches!(variant, StrategyVariant::ApiBased { .. });
            let url_template = if paged {
                format!("https://example.org/{path}?q={{query}}&p={{page}}")
            } else {
                format!("https://example.org/{path}?q={{query}}")
            };
            let template = RequestTemplate {
                method: if post { HttpMethod::Post } else { HttpMethod::Get },
                url_template,
                static_params,
                response_kind: if fragment {
                    ResponseKind::HtmlFragment
                } else {
                    ResponseKind::FullDocument
                },
            };
            StrategyConfig {
                variant,
                request_template: (!api || post).then_some(template),
            }
        })
}

fn binding() -> impl Strategy<Value = EngineBinding> {
    (
        "[a-z]{1,10}",
        selector(),
        option::of(selector()),
        option::of(selector()),
        option::of(selector()),
        option::of(selector()),
    )
        .prop_map(|(host, input, trigger, next_page, prev_page, reveal)| EngineBinding {
            search_page_url: format!("https://{host}.example/search"),
            input,
            trigger,
            next_page,
            prev_page,
            reveal,
        })
}

fn result_spec() -> impl Strategy<Value = SearchResultSpec> {
    (
        label("T"),
        selector(),
        vec((label("p"), selector(), extract(), any::<bool>()), 1..6),
        prop::sample::select(vec!["href", "src"]),
    )
        .prop_map(|(type_name, container, props, target_attr)| SearchResultSpec {
            type_name,
            container: container.many(),
            target_url: Some(PropertySpec::in_result(
                "target_url",
                Selector::css("a"),
                Extract::Attribute(target_attr.into()),
            )),
            properties: props
                .into_iter()
                .enumerate()
                .map(|(i, (name, sel, ex, in_target))| {
                    // index suffix keeps names unique
                    let name = format!("{name}#{i}");
                    if in_target {
                        PropertySpec::in_target(name, sel, ex)
                    } else {
                        PropertySpec::in_result(name, sel, ex)
                    }
                })
                .collect(),
        })
}

fn filters() -> impl Strategy<Value = ConditionManager> {
    vec((label("g"), any::<bool>(), vec((label("c"), modifier()), 0..3)), 0..3).prop_map(
        |groups| {
            let mut n = 0;
            ConditionManager {
                groups: groups
                    .into_iter()
                    .map(|(group_name, exclusive, conditions)| ConditionGroup {
                        group_name,
                        exclusive,
                        conditions: conditions
                            .into_iter()
                            .map(|(name, activation)| {
                                n += 1;
                                Condition {
                                    name: format!("{name}#{n}"),
                                    activation,
                                }
                            })
                            .collect(),
                    })
                    .collect(),
            }
        },
    )
}

fn orderings(properties: Vec<String>) -> impl Strategy<Value = Vec<OrderingSpec>> {
    let local = (
        prop::sample::select(properties),
        any::<bool>(),
        prop::sample::select(vec![Comparator::Lexical, Comparator::Numeric, Comparator::Date]),
    )
        .prop_map(|(property, asc, comparator)| {
            OrderingMode::Local(LocalOrdering {
                property,
                direction: if asc { SortDirection::Asc } else { SortDirection::Desc },
                comparator,
            })
        });
    let mode = prop_oneof![modifier().prop_map(OrderingMode::Remote), local];
    vec((label("o"), mode), 0..4).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (name, mode))| OrderingSpec {
                name: format!("{name}#{i}"),
                mode,
            })
            .collect()
    })
}

/// Valid specs covering every optional field and enum variant.
pub fn service_spec() -> impl Strategy<Value = ServiceSpec> {
    (
        "[a-z0-9][a-z0-9-]{0,15}",
        label("S"),
        binding(),
        option::of(strategy()),
        result_spec(),
        filters(),
        vec(text(), 0..3),
        0i64..2_000_000_000,
    )
        .prop_flat_map(|(id, name, binding, strategy, result_spec, filters, tags, created)| {
            let names = result_spec
                .properties
                .iter()
                .map(|p| p.name.clone())
                .collect();
            orderings(names).prop_map(move |orderings| ServiceSpec {
                id: id.clone(),
                name: name.clone(),
                binding: binding.clone(),
                strategy: strategy.clone(),
                result_spec: result_spec.clone(),
                filters: filters.clone(),
                orderings,
                metadata: ServiceMetadata {
                    tags: tags.clone(),
                    created: Utc.timestamp_opt(created, 0).unwrap(),
                    format_version: FORMAT_VERSION.into(),
                },
            })
        })
}
