mod common;

use std::path::Path;
use std::process::Command;

use serde_json::Value;
use shortcircuit::site::{fingerprint, is_root_type};
use shortcircuit::{enumerate_sites, AppFilter, SiteInventory, TryCatchSite};

fn data(rel: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(rel)
}

fn everything() -> AppFilter {
    AppFilter::new(&["**/*.py"], &[] as &[&str]).unwrap()
}

type Key = (String, String, [usize; 4], [usize; 4], Vec<String>, usize);

fn oracle(root: &Path) -> Vec<Key> {
    let out = Command::new("python3")
        .arg(data("ast_sites.py"))
        .arg(root)
        .output()
        .expect("python3 is required");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let four = |v: &Value| -> [usize; 4] {
        let a: Vec<usize> = v
            .as_array()
            .unwrap()
            .iter()
            .map(|x| x.as_u64().unwrap() as usize)
            .collect();
        [a[0], a[1], a[2], a[3]]
    };
    let mut keys: Vec<Key> = doc
        .iter()
        .map(|s| {
            (
                s["file"].as_str().unwrap().to_string(),
                s["function"].as_str().unwrap().to_string(),
                four(&s["try"]),
                four(&s["catch"]),
                s["types"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|t| t.as_str().unwrap().to_string())
                    .collect(),
                s["ordinal"].as_u64().unwrap() as usize,
            )
        })
        .collect();
    keys.sort();
    keys
}

fn key(s: &TryCatchSite) -> Key {
    (
        s.file.clone(),
        s.function.clone(),
        [
            s.try_span.start_line,
            s.try_span.start_col,
            s.try_span.end_line,
            s.try_span.end_col,
        ],
        [
            s.catch_span.start_line,
            s.catch_span.start_col,
            s.catch_span.end_line,
            s.catch_span.end_col,
        ],
        s.caught_types.clone(),
        s.catch_ordinal,
    )
}

fn ours(inv: &SiteInventory) -> Vec<Key> {
    let mut keys: Vec<Key> = inv.sites.iter().map(key).collect();
    keys.sort();
    keys
}

#[test]
fn matches_python_ast_on_awkward_syntax() {
    let root = data("tricky");
    let inv = enumerate_sites(&root, &everything()).unwrap();
    assert_eq!(ours(&inv), oracle(&root));
    assert_eq!(inv.sites.len(), 11);
}

#[test]
fn matches_python_ast_on_every_fixture() {
    for name in common::fixture_names() {
        let root = common::fixture(&name);
        let inv = enumerate_sites(&root, &everything()).unwrap();
        assert_eq!(ours(&inv), oracle(&root), "{name}");
    }
}

#[test]
fn hand_counted_file_has_five_sites() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(data("five_sites.py"), dir.path().join("five_sites.py")).unwrap();
    let inv = enumerate_sites(dir.path(), &everything()).unwrap();
    let summary: Vec<(String, usize, Vec<String>)> = inv
        .sites
        .iter()
        .map(|s| {
            (
                s.function.clone(),
                s.try_span.start_line,
                s.caught_types.clone(),
            )
        })
        .collect();
    let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    assert_eq!(
        summary,
        vec![
            ("load".into(), 5, v(&["FileNotFoundError"])),
            ("load".into(), 5, v(&["ValueError", "UnicodeDecodeError"])),
            ("load".into(), 11, v(&["OSError"])),
            ("Cache.get".into(), 19, v(&["KeyError"])),
            ("Cache.close".into(), 27, v(&["BaseException"])),
        ]
    );
    assert!(inv.sites[4].is_generic());
    assert_eq!(oracle(dir.path()), ours(&inv));
}

#[test]
fn site_ids_are_stable_and_distinct() {
    let root = data("tricky");
    let a = enumerate_sites(&root, &everything()).unwrap();
    let b = enumerate_sites(&root, &everything()).unwrap();
    assert_eq!(a, b);
    let mut ids: Vec<_> = a
        .sites
        .iter()
        .map(|s| s.site_id.as_str().to_string())
        .collect();
    ids.sort();
    ids.dedup();
    assert_eq!(ids.len(), a.sites.len());
    assert!(ids
        .iter()
        .all(|id| id.len() == 12 && id.chars().all(|c| c.is_ascii_hexdigit())));
}

#[test]
fn test_files_are_not_application_code() {
    let filter = AppFilter::default();
    assert!(filter.is_test("tests/test_x.py"));
    assert!(filter.is_test("pkg/x_test.py"));
    assert!(filter.is_test("conftest.py"));
    assert!(filter.is_app("app/x.py"));
    assert!(!filter.is_app("tests/helpers.py"));
    let inv = enumerate_sites(&common::fixture("two_catch_clauses"), &filter).unwrap();
    assert!(inv.sites.iter().all(|s| s.file.starts_with("app/")));
}

#[test]
fn fingerprint_tracks_python_sources() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.py"), "x = 1\n").unwrap();
    let before = fingerprint(dir.path()).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    assert_eq!(fingerprint(dir.path()).unwrap(), before);
    std::fs::write(dir.path().join("a.py"), "x = 2\n").unwrap();
    assert_ne!(fingerprint(dir.path()).unwrap(), before);
}

#[test]
fn root_types() {
    for t in ["Exception", "BaseException", "builtins.Exception"] {
        assert!(is_root_type(t));
    }
    assert!(!is_root_type("ValueError"));
    assert!(!is_root_type("mymod.Exception"));
}

#[test]
fn syntax_errors_are_reported_with_location() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.py"),
        "def f():\n    try:\n        pass\n",
    )
    .unwrap();
    let err = enumerate_sites(dir.path(), &everything()).unwrap_err();
    assert!(err.to_string().contains("bad.py"), "{err}");
}
