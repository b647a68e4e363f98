use std::process::Command;

fn svc(store: &std::path::Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_svc"))
        .args(args)
        .env("SVC_STORE_DIR", store)
        .env_remove("SVC_CONFIG")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(svc(dir.path(), &["list"]).0, 0);
    assert_eq!(svc(dir.path(), &["--no-such-flag"]).0, 2);
    assert_eq!(svc(dir.path(), &["detect", "x", "--probes", "a"]).0, 2);
    let (code, _, err) = svc(dir.path(), &["show", "missing"]);
    assert_eq!(code, 1);
    assert!(err.contains("not-found"), "{err}");
}

#[test]
fn install_validate_export_import() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, _) = svc(dir.path(), &["--fixture-port", "18999", "fixtures", "install"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);
    let (code, out, _) = svc(dir.path(), &["validate", "goodreads-fixture"]);
    assert_eq!((code, out.trim_end().lines().last()), (0, Some("valid")));

    let bundle = dir.path().join("bundle.json");
    assert_eq!(svc(dir.path(), &["export", "-o", bundle.to_str().unwrap()]).0, 0);
    let other = tempfile::tempdir().unwrap();
    let (code, out, _) = svc(other.path(), &["import", bundle.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);

    let bad = dir.path().join("bad.svcspec.json");
    std::fs::write(&bad, "{\"id\": \"x\"}").unwrap();
    let (code, out, _) = svc(dir.path(), &["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(out.contains("error"), "{out}");
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("svc.toml");
    std::fs::write(&cfg, "fixture_port = 18998\n").unwrap();
    let (code, _, _) = svc(dir.path(), &["--config", cfg.to_str().unwrap(), "fixtures", "install"]);
    assert_eq!(code, 0);
    let (_, out, _) = svc(dir.path(), &["show", "goodreads-fixture"]);
    assert!(out.contains("127.0.0.1:18998"));
    std::fs::write(&cfg, "nonsense = true\n").unwrap();
    assert_eq!(svc(dir.path(), &["--config", cfg.to_str().unwrap(), "list"]).0, 2);
}
