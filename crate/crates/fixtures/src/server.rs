use std::collections::{HashMap, HashSet};
use std::net::{SocketAddr, TcpListener as StdListener};
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use thiserror::Error;
use tokio::sync::oneshot;
use url::form_urlencoded;
use url::Url;

use crate::dataset::{self, Book, SortKey, VenueKind, PAGE_SIZE};

pub const DEFAULT_PORT: u16 = 8731;

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Runtime switches shared by all engines.
#[derive(Debug, Default)]
pub struct FixtureState {
    missing_details: RwLock<HashSet<u32>>,
}

impl FixtureState {
    /// Makes `/book/{id}` answer 404 until cleared.
    pub fn force_missing(&self, id: u32) {
        self.missing_details.write().unwrap().insert(id);
    }

    pub fn clear_missing(&self) {
        self.missing_details.write().unwrap().clear();
    }

    fn is_missing(&self, id: u32) -> bool {
        self.missing_details.read().unwrap().contains(&id)
    }
}

pub fn router(state: Arc<FixtureState>) -> Router {
    Router::new()
        .route("/", get(index))
        .route("/form/", get(form_page))
        .route("/form/search", get(form_results))
        .route("/ajax/", get(ajax_page))
        .route("/keystroke/", get(keystroke_page))
        .route("/api/search", get(fragment))
        .route("/scroll/", get(scroll_page))
        .route("/scroll/feed", get(scroll_feed))
        .route("/jsonapi", get(json_api))
        .route("/book/{id}", get(detail))
        .route("/dataset.json", get(dataset_file))
        .with_state(state)
}

/// Binds `port` (0 for any free port), failing with `PortInUse` when taken.
pub fn bind(port: u16) -> Result<StdListener, FixtureError> {
    match StdListener::bind(("127.0.0.1", port)) {
        Ok(l) => {
            l.set_nonblocking(true)?;
            Ok(l)
        }
        Err(e) if e.kind() == std::io::ErrorKind::AddrInUse => Err(FixtureError::PortInUse(port)),
        Err(e) => Err(e.into()),
    }
}

/// Serves until the future is dropped.
pub async fn serve(listener: StdListener, state: Arc<FixtureState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::from_std(listener)?;
    axum::serve(listener, router(state)).await
}

/// A harness running on its own thread and runtime; stops on drop.
pub struct FixtureServer {
    addr: SocketAddr,
    state: Arc<FixtureState>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl FixtureServer {
    pub fn base_url(&self) -> Url {
        Url::parse(&format!("http://{}/", self.addr)).expect("socket address is a valid host")
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn state(&self) -> &FixtureState {
        &self.state
    }
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn spawn_background(port: u16) -> Result<FixtureServer, FixtureError> {
    let listener = bind(port)?;
    let addr = listener.local_addr()?;
    let state = Arc::new(FixtureState::default());
    let (tx, rx) = oneshot::channel::<()>();
    let served = state.clone();
    let thread = std::thread::Builder::new()
        .name("fixture-harness".into())
        .spawn(move || {
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .worker_threads(2)
                .enable_all()
                .build()
                .expect("fixture runtime");
            runtime.block_on(async move {
                let listener =
                    tokio::net::TcpListener::from_std(listener).expect("listener registers");
                let _ = axum::serve(listener, router(served))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        })?;
    Ok(FixtureServer {
        addr,
        state,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

#[derive(Debug, Clone, Default)]
struct SearchParams {
    q: String,
    venue: Option<VenueKind>,
    sort: Option<SortKey>,
    page: usize,
}

impl SearchParams {
    fn from(raw: &HashMap<String, String>) -> Self {
        Self {
            q: raw.get("q").cloned().unwrap_or_default(),
            venue: raw.get("venue").and_then(|v| VenueKind::parse(v)),
            sort: raw.get("sort").and_then(|v| SortKey::parse(v)),
            page: raw
                .get("page")
                .and_then(|p| p.parse().ok())
                .filter(|p| *p >= 1)
                .unwrap_or(1),
        }
    }

    fn link(&self, path: &str, page: usize) -> String {
        let mut s = form_urlencoded::Serializer::new(String::new());
        s.append_pair("q", &self.q);
        if let Some(v) = self.venue {
            s.append_pair("venue", v.as_str());
        }
        if let Some(o) = self.sort {
            s.append_pair("sort", o.as_str());
        }
        s.append_pair("page", &page.to_string());
        format!("{path}?{}", s.finish())
    }

    fn with_venue(&self, venue: Option<VenueKind>) -> Self {
        Self {
            venue,
            page: 1,
            ..self.clone()
        }
    }

    fn with_sort(&self, sort: Option<SortKey>) -> Self {
        Self {
            sort,
            page: 1,
            ..self.clone()
        }
    }
}

/// Matching records for the engines, in server order.
fn search(p: &SearchParams) -> Vec<&'static Book> {
    let tokens: Vec<String> = p.q.to_lowercase().split_whitespace().map(String::from).collect();
    let mut hits: Vec<&Book> = dataset::dataset()
        .iter()
        .filter(|b| p.venue.is_none_or(|v| b.venue_kind == v))
        .filter(|b| {
            let hay = format!("{} {}", b.title, b.author).to_lowercase();
            tokens.iter().all(|t| hay.contains(t))
        })
        .collect();
    match p.sort {
        None => hits.sort_by_key(|b| b.id),
        Some(SortKey::Rating) => hits.sort_by(|a, b| {
            b.rating
                .partial_cmp(&a.rating)
                .unwrap()
                .then(a.id.cmp(&b.id))
        }),
        Some(SortKey::Year) => hits.sort_by(|a, b| b.year.cmp(&a.year).then(a.id.cmp(&b.id))),
    }
    hits
}

fn escape(raw: &str) -> String {
    raw.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn document(title: &str, body: &str) -> Html<String> {
    Html(format!(
        "<!DOCTYPE html>\n<html lang=\"en\">\n<head><meta charset=\"utf-8\"><title>{}</title></head>\n<body>\n{body}\n</body>\n</html>\n",
        escape(title)
    ))
}

fn result_item(b: &Book) -> String {
    format!(
        "  <li class=\"result\">\n    <a class=\"title\" href=\"{}\">{}</a>\n    <span class=\"author\">{}</span>\n    <span class=\"rating\">{}</span>\n    <span class=\"venue\">{}</span>\n    <span class=\"year\">{}</span>\n  </li>\n",
        b.path(),
        escape(&b.title),
        escape(&b.author),
        b.rating_text(),
        b.venue_kind.as_str(),
        b.year
    )
}

/// Result list, pager and the filter/ordering anchors.
fn results_block(p: &SearchParams, path: &str) -> String {
    let hits = search(p);
    let start = (p.page - 1) * PAGE_SIZE;
    let items: String = hits.iter().skip(start).take(PAGE_SIZE).map(|b| result_item(b)).collect();
    let mut pager = String::new();
    if p.page > 1 {
        pager.push_str(&format!(
            "<a class=\"prev\" href=\"{}\">Previous</a>\n",
            escape(&p.link(path, p.page - 1))
        ));
    }
    if start + PAGE_SIZE < hits.len() {
        pager.push_str(&format!(
            "<a class=\"next\" href=\"{}\">Next</a>\n",
            escape(&p.link(path, p.page + 1))
        ));
    }
    let anchor = |class: &str, params: SearchParams, label: &str| {
        format!(
            "<a class=\"{class}\" href=\"{}\">{label}</a>\n",
            escape(&params.link(path, 1))
        )
    };
    format!(
        "<div class=\"controls\">\n{}{}{}{}</div>\n<p class=\"count\">{} results</p>\n<ul class=\"results\">\n{items}</ul>\n<nav class=\"pager\">\n{pager}</nav>\n",
        anchor("filter", p.with_venue(Some(VenueKind::Journal)), "Journal only"),
        anchor("filter", p.with_venue(Some(VenueKind::Conference)), "Conference only"),
        anchor("order", p.with_sort(Some(SortKey::Rating)), "By rating"),
        anchor("order", p.with_sort(Some(SortKey::Year)), "By year"),
        hits.len()
    )
}

async fn index() -> Html<String> {
    document(
        "Fixture search engines",
        "<ul>\n<li><a href=\"/form/\">Form engine</a></li>\n<li><a href=\"/ajax/\">Ajax engine</a></li>\n<li><a href=\"/keystroke/\">Keystroke engine</a></li>\n<li><a href=\"/scroll/\">Infinite scroll engine</a></li>\n<li><a href=\"/jsonapi?q=\">JSON API</a></li>\n</ul>",
    )
}

async fn form_page() -> Html<String> {
    document(
        "Books - search",
        "<h1>Books</h1>\n<form id=\"search\" action=\"/form/search\" method=\"get\">\n  <input type=\"hidden\" name=\"ref\" value=\"home\">\n  <input type=\"search\" name=\"q\" placeholder=\"Title or author\">\n  <button type=\"submit\">Search</button>\n</form>",
    )
}

async fn form_results(Query(raw): Query<HashMap<String, String>>) -> Html<String> {
    let p = SearchParams::from(&raw);
    document(
        &format!("Books - {}", p.q),
        &format!(
            "<h1>Books</h1>\n<form id=\"search\" action=\"/form/search\" method=\"get\">\n  <input type=\"hidden\" name=\"ref\" value=\"home\">\n  <input type=\"search\" name=\"q\" value=\"{}\">\n  <button type=\"submit\">Search</button>\n</form>\n{}",
            escape(&p.q),
            results_block(&p, "/form/search")
        ),
    )
}

async fn ajax_page() -> Html<String> {
    document(
        "Books - ajax search",
        "<h1>Books</h1>\n<div class=\"searchbar\">\n  <input type=\"text\" name=\"q\" placeholder=\"Title or author\">\n  <button id=\"go\" type=\"button\" data-endpoint=\"/api/search\">Search</button>\n</div>\n<div id=\"results\"></div>\n<script>document.getElementById('go').onclick = function () { /* fetch fragment */ };</script>",
    )
}

async fn keystroke_page() -> Html<String> {
    document(
        "Books - instant search",
        "<h1>Books</h1>\n<input type=\"text\" name=\"q\" placeholder=\"Type to search\" data-endpoint=\"/api/search\">\n<div id=\"results\"></div>\n<script>/* fires the endpoint on every keystroke */</script>",
    )
}

async fn fragment(Query(raw): Query<HashMap<String, String>>) -> Html<String> {
    let p = SearchParams::from(&raw);
    Html(results_block(&p, "/api/search"))
}

async fn scroll_page() -> Html<String> {
    document(
        "Books - feed",
        "<h1>Books</h1>\n<form action=\"/scroll/\" method=\"get\">\n  <input type=\"search\" name=\"q\">\n  <button type=\"submit\">Search</button>\n</form>\n<ul class=\"results\" id=\"feed\"></ul>\n<script>window.addEventListener('scroll', function () { loadMore('/scroll/feed'); });</script>",
    )
}

async fn scroll_feed(Query(raw): Query<HashMap<String, String>>) -> Html<String> {
    let p = SearchParams::from(&raw);
    let offset: usize = raw.get("offset").and_then(|o| o.parse().ok()).unwrap_or(0);
    Html(
        search(&p)
            .iter()
            .skip(offset)
            .take(PAGE_SIZE)
            .map(|b| result_item(b))
            .collect(),
    )
}

async fn json_api(Query(raw): Query<HashMap<String, String>>) -> Json<serde_json::Value> {
    let p = SearchParams::from(&raw);
    let hits = search(&p);
    let start = (p.page - 1) * PAGE_SIZE;
    let rows: Vec<serde_json::Value> = hits
        .iter()
        .skip(start)
        .take(PAGE_SIZE)
        .map(|b| {
            serde_json::json!({
                "id": b.id,
                "title": b.title,
                "author": b.author,
                "rating": b.rating,
                "venue": b.venue_kind.as_str(),
                "year": b.year,
                "url": b.path(),
            })
        })
        .collect();
    Json(serde_json::json!({
        "total": hits.len(),
        "page": p.page,
        "has_next": start + PAGE_SIZE < hits.len(),
        "results": rows,
    }))
}

async fn detail(State(state): State<Arc<FixtureState>>, Path(id): Path<u32>) -> Response {
    match dataset::book(id) {
        Some(b) if !state.is_missing(id) => document(
            &b.title,
            &format!(
                "<h1 class=\"title\">{}</h1>\n<p class=\"author\">{}</p>\n<p class=\"description\">{}</p>\n<pre class=\"bibtex\">{}</pre>",
                escape(&b.title),
                escape(&b.author),
                escape(&b.description),
                escape(&b.bibtex())
            ),
        )
        .into_response(),
        _ => (StatusCode::NOT_FOUND, document("Not found", "<p>No such book.</p>")).into_response(),
    }
}

async fn dataset_file() -> Response {
    (
        [(header::CONTENT_TYPE, "application/json")],
        include_str!("../data/books.json"),
    )
        .into_response()
}
