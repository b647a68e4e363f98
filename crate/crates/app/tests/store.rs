use searchsvc_app::store::{SpecStore, StoreError};
use searchsvc_core::codec;
use searchsvc_fixtures::specs;

fn spec() -> searchsvc_core::ServiceSpec {
    specs::installed(&url::Url::parse("http://127.0.0.1:8731/").unwrap())[0].clone()
}

#[test]
fn crash_before_rename_keeps_previous_version() {
    let dir = tempfile::tempdir().unwrap();
    let store = SpecStore::open(dir.path()).unwrap();
    let v1 = spec();
    store.save(&v1).unwrap();

    let mut v2 = v1.clone();
    v2.name = "Renamed".into();
    store.inject_crash_before_rename(true);
    assert!(matches!(store.save(&v2), Err(StoreError::InjectedCrash)));
    drop(store);

    let reopened = SpecStore::open(dir.path()).unwrap();
    assert_eq!(reopened.get(&v1.id).unwrap(), v1);
    assert!(reopened.problems().is_empty());
    assert_eq!(reopened.ids(), vec![v1.id.clone()]);

    reopened.save(&v2).unwrap();
    let again = SpecStore::open(dir.path()).unwrap();
    assert_eq!(again.get(&v1.id).unwrap(), v2);
}

#[test]
fn files_are_canonical_and_bad_files_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let store = SpecStore::open(dir.path()).unwrap();
    let s = spec();
    store.save(&s).unwrap();
    let text = std::fs::read_to_string(store.path_of(&s.id)).unwrap();
    assert_eq!(text, codec::serialize(&s));

    std::fs::write(dir.path().join("broken.svcspec.json"), "{\"id\": 1}").unwrap();
    let reopened = SpecStore::open(dir.path()).unwrap();
    assert_eq!(reopened.problems().len(), 1);
    assert_eq!(reopened.list(), vec![s]);
}

#[test]
fn rejects_unsafe_ids_and_invalid_specs() {
    let dir = tempfile::tempdir().unwrap();
    let store = SpecStore::open(dir.path()).unwrap();
    let mut s = spec();
    s.id = "../escape".into();
    assert!(matches!(store.save(&s), Err(StoreError::BadId(_))));
    let mut s = spec();
    s.result_spec.properties.clear();
    assert!(matches!(store.save(&s), Err(StoreError::Invalid(_))));
    assert!(matches!(store.delete("nothing"), Err(StoreError::NotFound(_))));
}
