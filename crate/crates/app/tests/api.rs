use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::TimeZone;
use http_body_util::BodyExt;
use searchsvc_app::ops::AppContext;
use searchsvc_app::{api, output, SearchRequest, SpecStore};
use searchsvc_core::codec;
use searchsvc_core::engine::Clock;
use searchsvc_core::Engine;
use searchsvc_fixtures::specs::{self, EngineMode, FORM_ID};
use searchsvc_fixtures::{spawn_background, FixtureServer};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Setup {
    server: FixtureServer,
    ctx: Arc<AppContext>,
    _dir: tempfile::TempDir,
}

fn setup() -> Setup {
    let server = spawn_background(0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let store = SpecStore::open(dir.path()).unwrap();
    for spec in specs::installed(&server.base_url()) {
        store.save(&spec).unwrap();
    }
    let engine = Engine::with_clock(Clock::Fixed(
        chrono::Utc.with_ymd_and_hms(2016, 6, 6, 12, 0, 0).unwrap(),
    ));
    engine
        .register_provider(specs::PROVIDER_ID, specs::json_provider(&server.base_url()))
        .unwrap();
    Setup {
        ctx: Arc::new(AppContext::local(store, engine)),
        server,
        _dir: dir,
    }
}

async fn call(ctx: &Arc<AppContext>, method: &str, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let response = api::router(ctx.clone()).oneshot(request).await.unwrap();
    let status = response.status();
    let bytes = response.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn error_kind(body: &str) -> String {
    serde_json::from_str::<Value>(body).unwrap()["error"]
        .as_str()
        .unwrap()
        .to_string()
}

#[tokio::test]
async fn search_body_matches_cli_json() {
    let s = setup();
    let request = SearchRequest {
        filters: vec![specs::JOURNAL_ONLY.into()],
        ordering: Some(specs::BY_RATING.into()),
        ..SearchRequest::new("")
    };
    let (status, body) = call(
        &s.ctx,
        "POST",
        &format!("/services/{FORM_ID}/search"),
        Some(serde_json::to_string(&request).unwrap()),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let spec = s.ctx.spec(FORM_ID).unwrap();
    let direct = s.ctx.search(&spec, &request).await.unwrap();
    assert_eq!(body, output::json(&direct));
    assert_eq!(direct.items.len(), 10);
}

#[tokio::test]
async fn status_codes() {
    let s = setup();
    let (status, body) = call(&s.ctx, "POST", "/services/nope/search", Some(r#"{"keywords":"x"}"#.into())).await;
    assert_eq!((status, error_kind(&body).as_str()), (StatusCode::NOT_FOUND, "not-found"));

    let (status, _) = call(&s.ctx, "POST", &format!("/services/{FORM_ID}/search"), Some("{".into())).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (status, body) = call(
        &s.ctx,
        "POST",
        &format!("/services/{FORM_ID}/search"),
        Some(r#"{"keywords":"x","ordering":"Nope"}"#.into()),
    )
    .await;
    assert_eq!((status, error_kind(&body).as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "invalid-query"));

    let (status, body) = call(
        &s.ctx,
        "POST",
        &format!("/services/{FORM_ID}/render"),
        Some(r#"{"search":{"keywords":"x"},"visualizer_id":"pie"}"#.into()),
    )
    .await;
    assert_eq!((status, error_kind(&body).as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "unknown-visualizer"));

    // a port nobody listens on
    let mut dead = specs::installed(&url::Url::parse("http://127.0.0.1:9/").unwrap())[0].clone();
    dead.id = "dead".into();
    s.ctx.store.save(&dead).unwrap();
    let (status, body) = call(&s.ctx, "POST", "/services/dead/search", Some(r#"{"keywords":"x"}"#.into())).await;
    assert_eq!((status, error_kind(&body).as_str()), (StatusCode::BAD_GATEWAY, "fetch-failed"));

    let mut invalid = serde_json::to_value(s.ctx.spec(FORM_ID).unwrap()).unwrap();
    invalid["id"] = json!("broken");
    invalid["result_spec"]["properties"] = json!([]);
    let (status, body) = call(&s.ctx, "POST", "/services", Some(invalid.to_string())).await;
    assert_eq!((status, error_kind(&body).as_str()), (StatusCode::BAD_REQUEST, "invalid-spec"));
}

#[tokio::test]
async fn define_detect_search_render() {
    let s = setup();
    let draft = specs::draft(&s.server.base_url(), EngineMode::AjaxFragment);
    let (status, _) = call(&s.ctx, "DELETE", &format!("/services/{}", draft.id), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (status, body) = call(&s.ctx, "POST", "/services", Some(codec::serialize(&draft))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    let (status, _) = call(&s.ctx, "POST", "/services", Some(codec::serialize(&draft))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);

    let (status, body) = call(
        &s.ctx,
        "POST",
        &format!("/services/{}/detect-strategy", draft.id),
        Some(r#"{"probe_a":"Borges","probe_b":"Cortázar"}"#.into()),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let strategy: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(strategy["variant"], "write_and_click_for_ajax_call");
    assert!(s.ctx.spec(&draft.id).unwrap().strategy.is_some());

    let (status, body) = call(
        &s.ctx,
        "POST",
        &format!("/services/{}/render", draft.id),
        Some(r#"{"search":{"keywords":"Borges"},"visualizer_id":"aggregate_count","options":{"dimension":"author"}}"#.into()),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let model: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(model["kind"], "aggregate");
    assert_eq!(model["counts"]["Jorge Luis Borges"], 4);

    let (status, body) = call(&s.ctx, "GET", "/visualizers", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(serde_json::from_str::<Value>(&body).unwrap().as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn snapshot_and_suggestions() {
    let s = setup();
    let url = s.server.base_url().join("form/search?q=Borges").unwrap();
    let (status, body) = call(&s.ctx, "POST", "/fetch", Some(json!({ "url": url.as_str() }).to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let snap: Value = serde_json::from_str(&body).unwrap();
    let id = snap["snapshot_id"].as_str().unwrap();
    assert!(!snap["sanitized_html"].as_str().unwrap().contains("<script"));

    // html > body > ... find the first result title through the snapshot document
    let snapshot = s.ctx.snapshots.get(id).unwrap();
    let doc = &snapshot.document;
    let first = searchsvc_core::selector::evaluate(&searchsvc_core::Selector::css("li.result a.title"), doc)
        .unwrap()[0];
    let path = searchsvc_core::NodePath::of(&doc.document, first).unwrap();
    let (status, body) = call(
        &s.ctx,
        "POST",
        "/selectors/suggest",
        Some(json!({ "snapshot_id": id, "node_path": path.steps }).to_string()),
    )
    .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let suggestions: Value = serde_json::from_str(&body).unwrap();
    assert!(suggestions
        .as_array()
        .unwrap()
        .iter()
        .any(|s| s["specificity"] == "generalized" && s["match_count"] == 4));

    let (status, body) = call(&s.ctx, "POST", "/selectors/suggest", Some(json!({ "snapshot_id": id, "node_path": [9, 9, 9] }).to_string())).await;
    assert_eq!((status, error_kind(&body).as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "unresolvable-path"));
    let (status, _) = call(&s.ctx, "POST", "/selectors/suggest", Some(json!({ "snapshot_id": "gone", "node_path": [] }).to_string())).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn export_import_and_klm() {
    let s = setup();
    let (status, bundle) = call(&s.ctx, "GET", &format!("/services/{FORM_ID}/export"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = call(&s.ctx, "POST", "/services/import", Some(bundle)).await;
    assert_eq!(status, StatusCode::OK);
    let report: Value = serde_json::from_str(&body).unwrap();
    let new_id = report["imported"][0].as_str().unwrap();
    assert_ne!(new_id, FORM_ID);
    assert!(s.ctx.spec(new_id).unwrap().name.ends_with(codec::IMPORTED_SUFFIX));

    let scenario = json!({
        "scenario": {"name": "s", "steps": [
            {"label": "a", "seconds": 1.5},
            {"label": "b", "operators": [["K", 3], ["M", 1]]}
        ]}
    });
    let (status, body) = call(&s.ctx, "POST", "/klm/estimate", Some(scenario.to_string())).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    let v: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["total"], json!(3.69));

    let bad = json!({"scenario": {"name": "s", "steps": [{"label": "a", "operators": [["Z", 1]]}]}});
    let (status, body) = call(&s.ctx, "POST", "/klm/estimate", Some(bad.to_string())).await;
    assert_eq!((status, error_kind(&body).as_str()), (StatusCode::UNPROCESSABLE_ENTITY, "unknown-operator"));
}
