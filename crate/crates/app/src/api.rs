//! HTTP API over JSON.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use searchsvc_core::codec::{self, RejectedEntry};
use searchsvc_core::klm::{KlmScenario, OperatorTable, Seconds};
use searchsvc_core::ServiceSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::AppError;
use crate::ops::{self, AppContext, DetectRequest, RenderRequest, SearchRequest};
use crate::output;

type Ctx = State<Arc<AppContext>>;
type Reply = Result<Response, AppError>;

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        json_response(self.status(), &self.body())
    }
}

fn json_response<T: Serialize + ?Sized>(status: StatusCode, value: &T) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        output::json(value),
    )
        .into_response()
}

fn ok<T: Serialize + ?Sized>(value: &T) -> Reply {
    Ok(json_response(StatusCode::OK, value))
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, AppError> {
    serde_json::from_slice(body).map_err(|e| AppError::BadRequest(format!("invalid request body: {e}")))
}

fn parse_spec(body: &Bytes) -> Result<ServiceSpec, AppError> {
    let text = std::str::from_utf8(body)
        .map_err(|_| AppError::BadRequest("request body is not UTF-8".into()))?;
    Ok(codec::deserialize(text)?)
}

pub fn router(ctx: Arc<AppContext>) -> Router {
    Router::new()
        .route("/fetch", post(fetch))
        .route("/selectors/suggest", post(suggest))
        .route("/services", get(list_services).post(create_service))
        .route("/services/import", post(import))
        .route(
            "/services/{id}",
            get(get_service).put(put_service).delete(delete_service),
        )
        .route("/services/{id}/detect-strategy", post(detect))
        .route("/services/{id}/search", post(search))
        .route("/services/{id}/render", post(render))
        .route("/services/{id}/export", get(export))
        .route("/visualizers", get(visualizers))
        .route("/klm/estimate", post(klm_estimate))
        .route("/klm/compare", post(klm_compare))
        .fallback(|| async { AppError::not_found("route", "no such endpoint") })
        .with_state(ctx)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FetchBody {
    url: String,
}

async fn fetch(State(ctx): Ctx, body: Bytes) -> Reply {
    let req: FetchBody = parse(&body)?;
    let snapshot = ctx.snapshot(&req.url).await?;
    ok(&snapshot.info)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuggestBody {
    snapshot_id: String,
    node_path: Vec<usize>,
}

async fn suggest(State(ctx): Ctx, body: Bytes) -> Reply {
    let req: SuggestBody = parse(&body)?;
    ok(&ctx.suggest(&req.snapshot_id, req.node_path)?)
}

#[derive(Serialize)]
struct ServiceSummary {
    id: String,
    name: String,
    search_page_url: String,
    strategy: Option<&'static str>,
}

async fn list_services(State(ctx): Ctx) -> Reply {
    let list: Vec<ServiceSummary> = ctx
        .store
        .list()
        .into_iter()
        .map(|s| ServiceSummary {
            strategy: s.strategy.as_ref().map(|st| st.variant.name()),
            id: s.id,
            name: s.name,
            search_page_url: s.binding.search_page_url,
        })
        .collect();
    ok(&list)
}

#[derive(Serialize)]
struct Created<'a> {
    id: &'a str,
}

async fn create_service(State(ctx): Ctx, body: Bytes) -> Reply {
    let spec = parse_spec(&body)?;
    if ctx.store.contains(&spec.id) {
        return Err(AppError::Domain {
            kind: "id-taken",
            message: format!("a service with id {:?} already exists", spec.id),
        });
    }
    ctx.store.save(&spec)?;
    Ok(json_response(StatusCode::CREATED, &Created { id: &spec.id }))
}

async fn get_service(State(ctx): Ctx, Path(id): Path<String>) -> Reply {
    ok(&ctx.spec(&id)?)
}

async fn put_service(State(ctx): Ctx, Path(id): Path<String>, body: Bytes) -> Reply {
    let spec = parse_spec(&body)?;
    if spec.id != id {
        return Err(AppError::BadRequest(format!(
            "body id {:?} does not match {id:?}",
            spec.id
        )));
    }
    ctx.store.save(&spec)?;
    ok(&Created { id: &spec.id })
}

async fn delete_service(State(ctx): Ctx, Path(id): Path<String>) -> Reply {
    ctx.store.delete(&id)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn detect(State(ctx): Ctx, Path(id): Path<String>, body: Bytes) -> Reply {
    let req: DetectRequest = parse(&body)?;
    let spec = ctx.spec(&id)?;
    let (_, strategy) = ctx.detect(spec, &req).await?;
    ok(&strategy)
}

async fn search(State(ctx): Ctx, Path(id): Path<String>, body: Bytes) -> Reply {
    let req: SearchRequest = parse(&body)?;
    let spec = ctx.spec(&id)?;
    ok(&ctx.search(&spec, &req).await?)
}

async fn render(State(ctx): Ctx, Path(id): Path<String>, body: Bytes) -> Reply {
    let req: RenderRequest = parse(&body)?;
    let spec = ctx.spec(&id)?;
    let results = ctx.search(&spec, &req.search).await?;
    ok(&ctx.render(&results, req.visualizer_id.as_deref(), &req.options)?)
}

async fn export(State(ctx): Ctx, Path(id): Path<String>) -> Reply {
    let text = ctx.store.export_bundle(&[id])?;
    Ok(([(header::CONTENT_TYPE, "application/json")], text).into_response())
}

#[derive(Serialize)]
struct ImportSummary {
    imported: Vec<String>,
    rejected: Vec<RejectedEntry>,
}

async fn import(State(ctx): Ctx, body: Bytes) -> Reply {
    let text = std::str::from_utf8(&body)
        .map_err(|_| AppError::BadRequest("request body is not UTF-8".into()))?;
    let report = ctx.store.import_bundle(text)?;
    ok(&ImportSummary {
        imported: report.imported.into_iter().map(|s| s.id).collect(),
        rejected: report.rejected,
    })
}

async fn visualizers(State(ctx): Ctx) -> Reply {
    ok(&ctx.visualizers.list())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EstimateBody {
    scenario: KlmScenario,
    #[serde(default)]
    operators: BTreeMap<String, Seconds>,
}

fn table(overrides: &BTreeMap<String, Seconds>) -> Result<OperatorTable, AppError> {
    let mut table = OperatorTable::default();
    for (symbol, time) in overrides {
        table = table.with(symbol, *time)?;
    }
    Ok(table)
}

async fn klm_estimate(body: Bytes) -> Reply {
    let req: EstimateBody = parse(&body)?;
    ok(&ops::estimate(&req.scenario, &table(&req.operators)?)?)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareBody {
    a: KlmScenario,
    b: KlmScenario,
    #[serde(default)]
    operators: BTreeMap<String, Seconds>,
}

async fn klm_compare(body: Bytes) -> Reply {
    let req: CompareBody = parse(&body)?;
    ok(&searchsvc_core::klm::compare(&req.a, &req.b, &table(&req.operators)?)?)
}
