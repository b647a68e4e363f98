//! End-to-end acceptance checks against the local fixture engines.
//!
//! Prints one PASS/FAIL line per criterion and exits non-zero when any fails.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::{Config, TestRunner};
use searchsvc_app::config::{FileConfig, Overrides, Settings};
use searchsvc_app::{AppContext, SearchRequest, SpecStore};
use searchsvc_core::codec;
use searchsvc_core::engine::{DetectOptions, EngineError, FetchConfig, HttpFetcher};
use searchsvc_core::extract::{PageSummary, Provenance};
use searchsvc_core::klm::Seconds;
use searchsvc_core::visualize::{
    PresentationModel, RenderOptions, VisualizerRegistry, AGGREGATE, GROUP_BY, TABLE,
};
use searchsvc_core::{
    DomainObject, Engine, PropertyValue, ResultSet, SearchQuery, ServiceSpec,
};
use searchsvc_fixtures::specs::{self, EngineMode};
use searchsvc_fixtures::{generate, ground_truth, spawn_background, Book, FixtureServer, SortKey, VenueKind};
use serde_json::Value;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// Seconds written in a scenario file, read as exact hundredths.
fn centis_of(v: &Value) -> i64 {
    let text = v.to_string();
    let (whole, frac) = text.split_once('.').unwrap_or((&text, "0"));
    let frac = format!("{frac:0<2}");
    whole.parse::<i64>().unwrap() * 100 + frac[..2].parse::<i64>().unwrap()
}

fn file_total(path: &PathBuf) -> i64 {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v["steps"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| centis_of(&s["seconds"]))
        .sum()
}

fn klm() -> Outcome {
    let started = Instant::now();
    let dir = repo_root().join("scenarios");
    let files = [
        dir.join("bibtex_lookup_baseline.json"),
        dir.join("bibtex_lookup_with_services.json"),
        dir.join("define_services.json"),
    ];
    let run = |args: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_svc"))
            .args(args)
            .env("SVC_STORE_DIR", std::env::temp_dir().join("svc-acceptance-klm"))
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
        serde_json::from_slice::<Value>(&out.stdout).map_err(|e| e.to_string())
    };
    let mut args = vec!["klm", "estimate", "--json"];
    args.extend(files.iter().map(|p| p.to_str().unwrap()));
    let estimates = run(&args)?;
    let totals: Vec<Seconds> = estimates
        .as_array()
        .ok_or("estimate output is not a list")?
        .iter()
        .map(|e| serde_json::from_value(e["total"].clone()).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    let published = [4660, 1800, 3920].map(Seconds::from_centis);
    ensure!(totals == published, "totals {totals:?}, expected {published:?}");
    for (file, total) in files.iter().zip(&totals) {
        ensure!(
            total.centis() == file_total(file),
            "{} sums to {} centiseconds by hand",
            file.display(),
            file_total(file)
        );
    }
    let comparison = run(&["klm", "compare", "--json", files[0].to_str().unwrap(), files[1].to_str().unwrap()])?;
    let delta: Seconds = serde_json::from_value(comparison["delta"].clone()).map_err(|e| e.to_string())?;
    ensure!(delta == Seconds::from_centis(2860), "delta {delta}");
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!(
        "totals {} / {} / {} s, delta {delta} s, {} ms",
        totals[0],
        totals[1],
        totals[2],
        elapsed.as_millis()
    ))
}

async fn detection(server: &FixtureServer, fetcher: &HttpFetcher) -> Outcome {
    let started = Instant::now();
    let engine = Engine::new();
    let mut found = Vec::new();
    for mode in EngineMode::ALL {
        let draft = specs::draft(&server.base_url(), mode);
        let result = engine
            .detect_strategy(&draft, ("Borges", "Cortázar"), fetcher, &DetectOptions::default())
            .await;
        match (mode.expected_variant(), result) {
            (Some(expected), Ok(strategy)) => {
                ensure!(strategy.variant == expected, "{mode:?} detected as {}", strategy.variant.name());
                let mut spec = draft.clone();
                spec.strategy = Some(strategy);
                for probe in ["Borges", "Cortázar"] {
                    let (rs, _) = engine
                        .execute(&spec, &SearchQuery::new(probe), fetcher)
                        .await
                        .map_err(|e| format!("{mode:?} re-run of {probe:?}: {e}"))?;
                    ensure!(!rs.items.is_empty(), "{mode:?} re-run of {probe:?} found nothing");
                }
                found.push(expected.name().to_string());
            }
            (None, Err(EngineError::NoApplicableStrategy(_))) => found.push("no-applicable-strategy".into()),
            (_, other) => return Err(format!("{mode:?}: unexpected {other:?}")),
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(10), "took {elapsed:?}");
    Ok(format!("{}; {} ms", found.join(", "), elapsed.as_millis()))
}

fn expected_values(book: &Book) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("title", book.title.clone()),
        ("author", book.author.clone()),
        ("rating", book.rating_text()),
        ("venue", book.venue_kind.as_str().to_string()),
        ("year", book.year.to_string()),
    ])
}

/// Every page of a query, following next links.
async fn all_pages(
    engine: &Engine,
    spec: &ServiceSpec,
    query: &SearchQuery,
    fetcher: &HttpFetcher,
) -> Result<Vec<ResultSet>, String> {
    let (mut rs, mut cursor) = engine.execute(spec, query, fetcher).await.map_err(|e| e.to_string())?;
    let mut pages = vec![rs];
    while cursor.has_next {
        ensure!(pages.len() < 10, "runaway pagination");
        (rs, cursor) = engine.next_page(&cursor, fetcher).await.map_err(|e| e.to_string())?;
        pages.push(rs);
    }
    Ok(pages)
}

fn services(server: &FixtureServer) -> Vec<ServiceSpec> {
    specs::installed(&server.base_url())
}

fn engine_for(server: &FixtureServer) -> Engine {
    let engine = Engine::new();
    engine
        .register_provider(specs::PROVIDER_ID, specs::json_provider(&server.base_url()))
        .unwrap();
    engine
}

async fn oracle(server: &FixtureServer, fetcher: &HttpFetcher) -> Outcome {
    let engine = engine_for(server);
    let keywords = vec![
        "", "Borges", "borges", "Cortázar", "Jorge Luis", "el", "de", "la", "Sand", "Aleph", "a", "zzz",
        "Sábato", "Rayuela", "Book of", "Puig",
    ];
    let filters = vec![None, Some(specs::JOURNAL_ONLY), Some(specs::CONFERENCE_ONLY)];
    let orderings = vec![None, Some(specs::BY_RATING), Some(specs::BY_YEAR), Some(specs::TITLE_AZ)];
    let combos = (
        prop::sample::select(keywords),
        prop::sample::select(filters),
        prop::sample::select(orderings),
    );
    let mut runner = TestRunner::deterministic();
    let mut compared = 0;
    for _ in 0..50 {
        let (kw, filter, ordering) = combos.new_tree(&mut runner).unwrap().current();
        let venue = match filter {
            Some(f) if f == specs::JOURNAL_ONLY => Some(VenueKind::Journal),
            Some(_) => Some(VenueKind::Conference),
            None => None,
        };
        let sort = match ordering {
            Some(o) if o == specs::BY_RATING => Some(SortKey::Rating),
            Some(o) if o == specs::BY_YEAR => Some(SortKey::Year),
            _ => None,
        };
        let truth = ground_truth(kw, venue, sort);
        let mut want: Vec<(String, BTreeMap<&str, String>)> = truth
            .iter()
            .map(|b| (server.base_url().join(&b.path()).unwrap().to_string(), expected_values(b)))
            .collect();
        want.sort();
        let mut query = SearchQuery::new(kw);
        query.active_filters = filter.into_iter().map(str::to_string).collect();
        query.active_ordering = ordering.map(str::to_string);
        for spec in services(server) {
            let pages = all_pages(&engine, &spec, &query, fetcher)
                .await
                .map_err(|e| format!("{} {kw:?}: {e}", spec.id))?;
            let mut got: Vec<(String, BTreeMap<&str, String>)> = pages
                .iter()
                .flat_map(|p| &p.items)
                .map(|o| {
                    let values = ["title", "author", "rating", "venue", "year"]
                        .into_iter()
                        .map(|k| (k, o.value(k).unwrap_or("<missing>").to_string()))
                        .collect();
                    (o.target_url.clone(), values)
                })
                .collect();
            got.sort();
            ensure!(
                got == want,
                "{} keywords={kw:?} filter={filter:?} ordering={ordering:?}: {} results, oracle has {}",
                spec.id,
                got.len(),
                want.len()
            );
            compared += 1;
        }
    }
    Ok(format!("50 combinations x 4 engines, {compared} result sets equal to the oracle"))
}

async fn pagination(server: &FixtureServer, fetcher: &HttpFetcher) -> Outcome {
    let engine = engine_for(server);
    let truth: Vec<String> = ground_truth("", None, None)
        .iter()
        .map(|b| server.base_url().join(&b.path()).unwrap().to_string())
        .collect();
    ensure!(truth.len() == 30, "oracle matches {} items, expected 30", truth.len());
    let mut sorted_truth = truth.clone();
    sorted_truth.sort();
    for spec in services(server) {
        let query = SearchQuery::new("");
        let (first, cursor) = engine.execute(&spec, &query, fetcher).await.map_err(|e| e.to_string())?;
        match engine.prev_page(&cursor, fetcher).await {
            Err(EngineError::NoSuchPage(_)) => {}
            other => return Err(format!("{}: prev from page 1 gave {:?}", spec.id, other.map(|r| r.0.page))),
        }
        let pages = all_pages(&engine, &spec, &query, fetcher).await?;
        let sizes: Vec<usize> = pages.iter().map(|p| p.items.len()).collect();
        ensure!(sizes == [10, 10, 10], "{}: page sizes {sizes:?}", spec.id);
        let content = |rs: &ResultSet| {
            rs.items
                .iter()
                .map(|o| (o.target_url.clone(), o.values.clone()))
                .collect::<Vec<_>>()
        };
        ensure!(content(&pages[0]) == content(&first), "{}: page 1 differs between runs", spec.id);
        let mut union: Vec<String> = pages.iter().flat_map(|p| &p.items).map(|o| o.target_url.clone()).collect();
        union.sort();
        let before = union.len();
        union.dedup();
        ensure!(union.len() == before, "{}: pages overlap", spec.id);
        ensure!(union == sorted_truth, "{}: union differs from the oracle", spec.id);
        let summaries: Vec<PageSummary> = pages.iter().map(|p| p.page).collect();
        ensure!(
            !summaries[2].has_next && summaries[2].has_prev && !summaries[0].has_prev,
            "{}: page flags {summaries:?}",
            spec.id
        );
    }
    Ok("10/10/10 on all 4 engines, disjoint, union = oracle, prev from page 1 rejected".into())
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

async fn enrichment(server: &FixtureServer) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ctx = AppContext::local(SpecStore::open(dir.path()).map_err(|e| e.to_string())?, engine_for(server));
    let request = SearchRequest {
        enrich: true,
        ..SearchRequest::new("")
    };
    let bibtex_of = |o: &DomainObject| o.values.get("bibtex").cloned();
    let book_of = |o: &DomainObject| {
        let id: u32 = o.target_url.rsplit('/').next().unwrap().parse().unwrap();
        searchsvc_fixtures::dataset::book(id).unwrap()
    };
    let mut filled = 0;
    let mut total = 0;
    for spec in services(server) {
        let rs = ctx.search(&spec, &request).await.map_err(|e| e.to_string())?;
        for o in &rs.items {
            total += 1;
            let want = PropertyValue::Text(squash(&book_of(o).bibtex()));
            ensure!(bibtex_of(o) == Some(want), "{}: {} not enriched", spec.id, o.target_url);
            filled += 1;
        }
    }

    let spec = &services(server)[0];
    let baseline = ctx.search(spec, &request).await.map_err(|e| e.to_string())?;
    let victim = book_of(&baseline.items[3]).id;
    server.state().force_missing(victim);
    let rs = ctx.search(spec, &request).await;
    server.state().clear_missing();
    let rs = rs.map_err(|e| e.to_string())?;
    for o in &rs.items {
        let id = book_of(o).id;
        let v = bibtex_of(o);
        if id == victim {
            ensure!(v == Some(PropertyValue::Missing), "forced 404 item has {v:?}");
        } else {
            ensure!(v.as_ref().is_some_and(|v| !v.is_missing()), "item {id} lost its value");
        }
    }
    ensure!(rs.diagnostics.len() == 1, "diagnostics {:?}", rs.diagnostics);
    Ok(format!(
        "{filled}/{total} items filled; with book {victim} forced to 404 only it is missing"
    ))
}

fn round_trips() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&generate::service_spec(), |spec| {
            let text = codec::serialize(&spec);
            let back = codec::deserialize(&text).expect("canonical text parses");
            prop_assert_eq!(&back, &spec);
            prop_assert_eq!(codec::serialize(&back), text);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    // export -> import -> export, once into an empty store and once into one
    // where every id is taken
    let mut batch_runner = TestRunner::deterministic();
    let mut batch: Vec<ServiceSpec> = Vec::new();
    while batch.len() < 25 {
        let s = generate::service_spec().new_tree(&mut batch_runner).unwrap().current();
        if !batch.iter().any(|b| b.id == s.id) {
            batch.push(s);
        }
    }
    batch.sort_by(|a, b| a.id.cmp(&b.id));
    let exported = codec::export_bundle(&batch);
    let ids: Vec<String> = batch.iter().map(|s| s.id.clone()).collect();

    let fresh = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = SpecStore::open(fresh.path()).map_err(|e| e.to_string())?;
    let report = store.import_bundle(&exported).map_err(|e| e.to_string())?;
    ensure!(report.rejected.is_empty(), "rejected {:?}", report.rejected);
    let again = store.export_bundle(&ids).map_err(|e| e.to_string())?;
    ensure!(again == exported, "re-export into an empty store is not byte-identical");

    let report = store.import_bundle(&exported).map_err(|e| e.to_string())?;
    ensure!(report.imported.len() == batch.len(), "only {} re-imported", report.imported.len());
    let renamed: Vec<String> = report.imported.iter().map(|s| s.id.clone()).collect();
    ensure!(renamed.iter().all(|id| !ids.contains(id)), "colliding ids were kept");
    let third = store.export_bundle(&renamed).map_err(|e| e.to_string())?;
    let mut v: Value = serde_json::from_str(&third).map_err(|e| e.to_string())?;
    for (svc, original) in v["services"].as_array_mut().unwrap().iter_mut().zip(&ids) {
        svc["id"] = Value::String(original.clone());
        let name = svc["name"].as_str().unwrap().trim_end_matches(codec::IMPORTED_SUFFIX).to_string();
        svc["name"] = Value::String(name);
    }
    ensure!(
        codec::to_canonical_string(&v) == exported,
        "re-export after id regeneration differs beyond ids"
    );

    let crash_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store = SpecStore::open(crash_dir.path()).map_err(|e| e.to_string())?;
    let v1 = batch[0].clone();
    store.save(&v1).map_err(|e| e.to_string())?;
    let mut v2 = v1.clone();
    v2.name = "changed".into();
    store.inject_crash_before_rename(true);
    ensure!(store.save(&v2).is_err(), "injected crash did not fire");
    drop(store);
    let reopened = SpecStore::open(crash_dir.path()).map_err(|e| e.to_string())?;
    ensure!(reopened.get(&v1.id).ok() == Some(v1), "previous version lost after crash");
    ensure!(reopened.problems().is_empty(), "leftover temp file was read");
    Ok("1000 generated specs round-trip; bundle stable with and without id regeneration; crash keeps old file".into())
}

fn result_set() -> impl Strategy<Value = ResultSet> {
    let value = prop_oneof![
        3 => prop::sample::select(vec!["a", "b", "c", "ñ", "b "]).prop_map(|s| PropertyValue::Text(s.into())),
        1 => Just(PropertyValue::Missing),
    ];
    prop::collection::vec((value.clone(), value.clone(), value), 0..40).prop_map(|rows| {
        let items = rows
            .into_iter()
            .enumerate()
            .map(|(i, (x, y, z))| DomainObject {
                type_name: "Thing".into(),
                values: IndexMap::from([("x".into(), x), ("y".into(), y), ("z".into(), z)]),
                target_url: format!("http://t.test/{i}"),
                provenance: Provenance {
                    source_url: "http://t.test/".into(),
                    container_index: i,
                    fetched_at: chrono::DateTime::UNIX_EPOCH,
                },
            })
            .collect();
        ResultSet {
            items,
            ..ResultSet::empty("random", SearchQuery::new("q"))
        }
    })
}

fn conservation() -> Outcome {
    let registry = VisualizerRegistry::with_builtins();
    let mut runner = TestRunner::new(Config {
        cases: 500,
        failure_persistence: None,
        ..Config::default()
    });
    runner
        .run(&(result_set(), prop::sample::select(vec!["x", "y", "z"])), |(rs, prop_name)| {
            let opts = |k: &str, v: &str| RenderOptions::from([(k.to_string(), v.to_string())]);
            let PresentationModel::Table(t) = registry.render(&rs, Some(TABLE), &RenderOptions::new()).unwrap() else {
                panic!("table visualizer returned another model")
            };
            prop_assert_eq!(t.rows.len(), rs.items.len());

            let PresentationModel::Grouped(g) = registry.render(&rs, Some(GROUP_BY), &opts("property", prop_name)).unwrap() else {
                panic!("group visualizer returned another model")
            };
            let mut seen: Vec<&str> = Vec::new();
            for (key, members) in &g.groups {
                prop_assert!(!members.is_empty());
                for m in members {
                    prop_assert_eq!(m.value(prop_name), Some(key.as_str()));
                    seen.push(&m.target_url);
                }
            }
            for m in &g.missing_group {
                prop_assert!(m.value(prop_name).is_none());
                seen.push(&m.target_url);
            }
            seen.sort();
            let mut all: Vec<&str> = rs.items.iter().map(|o| o.target_url.as_str()).collect();
            all.sort();
            prop_assert_eq!(seen, all);

            let PresentationModel::Aggregate(a) = registry.render(&rs, Some(AGGREGATE), &opts("dimension", prop_name)).unwrap() else {
                panic!("aggregate visualizer returned another model")
            };
            let present = rs.items.iter().filter(|o| o.value(prop_name).is_some()).count();
            prop_assert_eq!(a.counts.values().sum::<usize>(), present);
            for (key, n) in &a.counts {
                prop_assert_eq!(*n, rs.items.iter().filter(|o| o.value(prop_name) == Some(key.as_str())).count());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("500 random result sets: table rows = items, groups partition, counts sum".into())
}

async fn latency(server: &FixtureServer) -> Outcome {
    // the fetch settings `svc` itself runs with
    let settings = Settings::resolve(Overrides::default(), &FileConfig::default());
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fetcher = HttpFetcher::shared(settings.fetch).map_err(|e| e.to_string())?;
    let ctx = AppContext::new(SpecStore::open(dir.path()).map_err(|e| e.to_string())?, engine_for(server), fetcher);
    let spec = &services(server)[0];
    let request = SearchRequest {
        enrich: true,
        ..SearchRequest::new("")
    };
    let started = Instant::now();
    let rs = ctx.search(spec, &request).await.map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(rs.items.len() == 10, "{} items", rs.items.len());
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("search + enrichment of {} items in {} ms", rs.items.len(), elapsed.as_millis()))
}

fn main() {
    let runtime = tokio::runtime::Runtime::new().expect("runtime");
    let server = spawn_background(0).expect("fixture server starts");
    let fetcher = HttpFetcher::new(FetchConfig::local()).expect("client builds");

    let results: Vec<(&str, Outcome)> = vec![
        ("KLM estimates", klm()),
        ("strategy detection", runtime.block_on(detection(&server, &fetcher))),
        ("extraction equals oracle", runtime.block_on(oracle(&server, &fetcher))),
        ("pagination completeness", runtime.block_on(pagination(&server, &fetcher))),
        ("in-target enrichment", runtime.block_on(enrichment(&server))),
        ("round-trips", round_trips()),
        ("visualizer conservation", conservation()),
        ("end-to-end latency", runtime.block_on(latency(&server))),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
