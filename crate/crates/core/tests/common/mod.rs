#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use shortcircuit::coverage::CoverageIndex;
use shortcircuit::engine::{Cell, InjectionMatrix, RowKey};
use shortcircuit::report::SiteRow;
use shortcircuit::trace::UsageKind;
use shortcircuit::{run_pipeline, Report, RunConfig, SiteId};
use tempfile::TempDir;

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture(name: &str) -> PathBuf {
    fixtures_dir().join(name)
}

pub fn fixture_names() -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(fixtures_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().join("expected.json").is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

pub fn expected(name: &str) -> Value {
    let text = fs::read_to_string(fixture(name).join("expected.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn config(name: &str, out: &Path, stretch: bool) -> RunConfig {
    let mut c = RunConfig::new(fixture(name), out);
    c.stretch = stretch;
    c.jobs = 4;
    if let Some(t) = expected(name).get("timeout").and_then(Value::as_f64) {
        c.timeout = t;
    }
    c
}

pub struct FixtureRun {
    pub name: String,
    pub out: TempDir,
    pub report: Report,
}

pub fn run_fixture(name: &str, stretch: bool) -> FixtureRun {
    let out = TempDir::new().unwrap();
    let report =
        run_pipeline(&config(name, out.path(), stretch)).unwrap_or_else(|e| panic!("{name}: {e}"));
    FixtureRun {
        name: name.to_string(),
        out,
        report,
    }
}

/// Resolves `file::qualname#k` to the k-th site of that function.
pub fn find_row<'a>(report: &'a Report, key: &str) -> Option<&'a SiteRow> {
    let (file, rest) = key.split_once("::")?;
    let (function, k) = rest.rsplit_once('#')?;
    let k: usize = k.parse().ok()?;
    report
        .sites
        .iter()
        .filter(|r| r.function == function && r.location.starts_with(&format!("{file}:")))
        .nth(k)
}

fn str_of(v: &Value, key: &str) -> Option<String> {
    v.get(key).and_then(Value::as_str).map(str::to_string)
}

/// Every disagreement between a fixture report and its expected table.
pub fn mismatches(name: &str, report: &Report) -> Vec<String> {
    let exp = expected(name);
    let mut out = Vec::new();
    let mut check = |what: String, want: String, got: String| {
        if want != got {
            out.push(format!("{name}: {what}: expected {want}, got {got}"));
        }
    };
    let s = &report.stats;
    check(
        "tests".into(),
        exp["tests"].to_string(),
        s.total_tests.to_string(),
    );
    check(
        "sites".into(),
        exp["sites"].to_string(),
        report.sites.len().to_string(),
    );
    for (color, got) in [
        ("pink", s.pink_count),
        ("white", s.white_count),
        ("blue", s.blue_count),
    ] {
        check(
            color.into(),
            exp["taxonomy"][color].to_string(),
            got.to_string(),
        );
    }
    let results: BTreeMap<&SiteId, _> = report
        .stretch
        .iter()
        .flat_map(|st| st.results.iter())
        .map(|r| (&r.candidate.site_id, r))
        .collect();
    for (key, want) in exp["verdicts"].as_object().unwrap() {
        let Some(row) = find_row(report, key) else {
            check(key.clone(), "a site".into(), "none".into());
            continue;
        };
        let v = &row.verdict;
        check(
            format!("{key} resilience"),
            str_of(want, "resilience").unwrap(),
            v.pure_resilience.to_string(),
        );
        check(
            format!("{key} independence"),
            str_of(want, "independence").unwrap(),
            v.source_independence.to_string(),
        );
        check(
            format!("{key} stretch"),
            str_of(want, "stretch").unwrap(),
            row.stretch.map_or("-", |d| d.as_str()).to_string(),
        );
        let result = results.get(&row.site_id);
        if let Some(case) = str_of(want, "case") {
            check(
                format!("{key} case"),
                case,
                result
                    .map_or("-", |r| r.candidate.case.as_str())
                    .to_string(),
            );
        }
        if let Some(reason) = str_of(want, "reason") {
            check(
                format!("{key} reason"),
                reason,
                result.and_then(|r| r.reason.clone()).unwrap_or_default(),
            );
        }
        if let Some(tests) = want.get("failing_tests") {
            let got = result.map(|r| r.failing_tests.clone()).unwrap_or_default();
            check(
                format!("{key} failing tests"),
                tests.to_string(),
                serde_json::to_string(&got).unwrap(),
            );
        }
        let flag = |k: &str| want.get(k).and_then(Value::as_bool);
        check(
            format!("{key} executed"),
            flag("executed").unwrap_or(true).to_string(),
            v.executed.to_string(),
        );
        check(
            format!("{key} diagnostic"),
            flag("diagnostic").unwrap_or(false).to_string(),
            (!v.diagnostics.is_empty() && !v.uninjectable).to_string(),
        );
        check(
            format!("{key} uninjectable"),
            flag("uninjectable").unwrap_or(false).to_string(),
            v.uninjectable.to_string(),
        );
        if let Some(cells) = str_of(want, "cells") {
            for e in &v.evidence {
                check(
                    format!("{key} cell {}", e.test_id),
                    cells.clone(),
                    format!("{:?}", e.cell).to_lowercase(),
                );
            }
        }
    }
    if let Some(cov) = exp.get("covering").and_then(Value::as_object) {
        for (key, want) in cov {
            let Some(row) = find_row(report, key) else {
                continue;
            };
            let mut got: Vec<&str> = row
                .verdict
                .evidence
                .iter()
                .map(|e| e.test_id.as_str())
                .collect();
            got.dedup();
            check(
                format!("{key} covering"),
                want.to_string(),
                serde_json::to_string(&got).unwrap(),
            );
        }
    }
    if let Some(colors) = exp.get("colors").and_then(Value::as_object) {
        for (test, want) in colors {
            let rec = report.tests.iter().find(|r| &r.test_id == test);
            let got = rec.map_or("missing".to_string(), |r| {
                format!(
                    "{:?}/{}/{}",
                    r.color, r.bubbled_count, r.internal_thrown_count
                )
                .to_lowercase()
            });
            let w = format!(
                "{}/{}/{}",
                str_of(want, "color").unwrap(),
                want["bubbled"],
                want["internal"]
            );
            check(format!("{test} color"), w, got);
        }
    }
    out
}

/// A random coverage index and matrix over `sites` single-row sites and
/// `tests` tests.
pub struct Instance {
    pub coverage: CoverageIndex,
    pub matrix: InjectionMatrix,
    pub rows: Vec<RowKey>,
    pub tests: Vec<String>,
}

pub fn random_instance(rng: &mut ChaCha8Rng, max_sites: usize, max_tests: usize) -> Instance {
    let n_sites = rng.gen_range(1..=max_sites);
    let n_tests = rng.gen_range(1..=max_tests);
    let tests: Vec<String> = (0..n_tests)
        .map(|i| format!("tests/test_s.py::t{i}"))
        .collect();
    let rows: Vec<RowKey> = (0..n_sites)
        .map(|i| RowKey {
            site_id: SiteId::new(format!("site{i:02}")),
            exception_type: None,
        })
        .collect();
    let kinds = [UsageKind::Pink, UsageKind::White, UsageKind::Blue];
    let mut coverage = CoverageIndex::default();
    let mut matrix = InjectionMatrix::default();
    for row in &rows {
        for t in &tests {
            if rng.gen_bool(0.4) {
                continue;
            }
            for _ in 0..rng.gen_range(1..=3) {
                coverage.record(row.site_id.clone(), t, kinds[rng.gen_range(0..3)]);
            }
            if rng.gen_bool(0.9) {
                let cell = [Cell::Pass, Cell::Fail, Cell::Error][rng.gen_range(0..3)];
                matrix.set(row.clone(), t, cell);
            }
        }
    }
    Instance {
        coverage,
        matrix,
        rows,
        tests,
    }
}

/// The four predicates expanded literally over every test of the instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Literal {
    pub source_independent: bool,
    pub source_dependent: bool,
    pub resilient: bool,
    pub not_resilient: bool,
}

pub fn literal(inst: &Instance, row: &RowKey) -> Literal {
    let in_a = |t: &String| {
        !inst.coverage.usages(&row.site_id, t).is_empty() && inst.matrix.cell(row, t).is_some()
    };
    let pass = |t: &String| inst.matrix.cell(row, t) == Some(Cell::Pass);
    let usages = |t: &String| inst.coverage.usages(&row.site_id, t).to_vec();
    let is_white = |u: &UsageKind| *u == UsageKind::White;
    let is_pink = |u: &UsageKind| *u == UsageKind::Pink;

    let mut source_independent = true;
    for a in inst.tests.iter().filter(|t| in_a(t)) {
        for u in usages(a) {
            if is_white(&u) && !pass(a) {
                source_independent = false;
            }
        }
    }
    let mut source_dependent = false;
    for a in inst.tests.iter().filter(|t| in_a(t)) {
        let mut all = true;
        for u in usages(a) {
            all &= is_white(&u) && !pass(a);
        }
        source_dependent |= all;
    }
    let mut all_pass = true;
    let mut some_pink = false;
    for a in inst.tests.iter().filter(|t| in_a(t)) {
        all_pass &= pass(a);
        for u in usages(a) {
            some_pink |= is_pink(&u);
        }
    }
    let mut not_resilient = false;
    for a in inst.tests.iter().filter(|t| in_a(t)) {
        not_resilient |= !pass(a);
    }
    Literal {
        source_independent,
        source_dependent,
        resilient: all_pass && some_pink,
        not_resilient,
    }
}

/// An instrumented copy of a project plus a harness ready to run it.
pub struct Setup {
    pub work: TempDir,
    pub root: PathBuf,
    pub inventory: shortcircuit::SiteInventory,
    pub instrumented: PathBuf,
    pub harness: shortcircuit::harness::Harness,
}

pub fn setup(root: &Path, timeout: f64) -> Setup {
    use shortcircuit::harness::{Harness, TestCommand};
    use shortcircuit::instrument::SupportFiles;
    use shortcircuit::{enumerate_sites, instrument, AppFilter};

    let root = root.canonicalize().unwrap();
    let work = TempDir::new().unwrap();
    let filter = AppFilter::default();
    let inventory = enumerate_sites(&root, &filter).unwrap();
    let project = instrument(&root, &inventory, &work.path().join("instrumented")).unwrap();
    let app_files: Vec<String> = shortcircuit::site::python_sources(&project.root)
        .unwrap()
        .into_iter()
        .filter(|rel| filter.is_app(rel))
        .map(|rel| project.root.join(rel).to_string_lossy().into_owned())
        .collect();
    let support = SupportFiles::write(&work.path().join("support"), &app_files).unwrap();
    let harness = Harness::new(
        TestCommand::default(),
        support,
        timeout,
        &work.path().join("runs"),
    )
    .unwrap();
    Setup {
        instrumented: project.root,
        work,
        root,
        inventory,
        harness,
    }
}

/// Writes `files` under a fresh temporary directory.
pub fn project(files: &[(&str, &str)]) -> TempDir {
    let dir = TempDir::new().unwrap();
    for (rel, text) in files {
        let path = dir.path().join(rel);
        fs::create_dir_all(path.parent().unwrap()).unwrap();
        fs::write(path, text).unwrap();
    }
    dir
}
