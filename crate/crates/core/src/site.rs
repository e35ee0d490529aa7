//! Static enumeration of try-catch sites.
//!
//! A `try` with `n` handlers yields `n` sites that share one try span. Sites
//! are identified by a hash of their file, the `try` keyword position and the
//! handler ordinal, so ids survive edits elsewhere in the project.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobBuilder, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::python::{self, TryStatement};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(String);

impl SiteId {
    pub fn new(id: impl Into<String>) -> Self {
        SiteId(id.into())
    }

    fn derive(file: &str, line: usize, col: usize, ordinal: usize) -> Self {
        let mut h = Sha256::new();
        h.update(file.as_bytes());
        h.update(format!("\0{line}\0{col}\0{ordinal}").as_bytes());
        SiteId(hex::encode(&h.finalize()[..6]))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// 1-based lines, 0-based character columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceSpan {
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl SourceSpan {
    pub fn contains(&self, other: &SourceSpan) -> bool {
        (self.start_line, self.start_col) <= (other.start_line, other.start_col)
            && (other.end_line, other.end_col) <= (self.end_line, self.end_col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TryCatchSite {
    pub site_id: SiteId,
    /// Project-relative path with `/` separators.
    pub file: String,
    #[serde(rename = "try")]
    pub try_span: SourceSpan,
    #[serde(rename = "catch")]
    pub catch_span: SourceSpan,
    pub caught_types: Vec<String>,
    pub catch_ordinal: usize,
    pub function: String,
}

impl TryCatchSite {
    pub fn location(&self) -> String {
        format!(
            "{}:{}#{}",
            self.file, self.try_span.start_line, self.catch_ordinal
        )
    }

    /// Whether the handler already catches the root of the hierarchy.
    pub fn is_generic(&self) -> bool {
        self.caught_types.iter().any(|t| is_root_type(t))
    }
}

pub const STRETCH_TYPE: &str = "Exception";

pub fn is_root_type(name: &str) -> bool {
    matches!(
        name,
        "Exception" | "BaseException" | "builtins.Exception" | "builtins.BaseException"
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteInventory {
    pub project_fingerprint: String,
    pub sites: Vec<TryCatchSite>,
}

impl SiteInventory {
    pub fn lookup(&self, id: &SiteId) -> Result<&TryCatchSite> {
        self.sites
            .iter()
            .find(|s| &s.site_id == id)
            .ok_or_else(|| Error::SiteNotFound(id.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Free-function form of [`SiteInventory::lookup`].
pub fn site_lookup<'a>(inventory: &'a SiteInventory, id: &SiteId) -> Result<&'a TryCatchSite> {
    inventory.lookup(id)
}

/// Separates application code from test code by path globs.
#[derive(Debug, Clone)]
pub struct AppFilter {
    app: GlobSet,
    tests: GlobSet,
    app_patterns: Vec<String>,
    test_patterns: Vec<String>,
}

pub const DEFAULT_TEST_PATTERNS: &[&str] = &[
    "**/test_*.py",
    "**/*_test.py",
    "**/tests/**",
    "**/conftest.py",
];

fn glob_set(patterns: &[String]) -> Result<GlobSet> {
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        let glob: Glob = GlobBuilder::new(p).literal_separator(true).build()?;
        b.add(glob);
    }
    Ok(b.build()?)
}

impl AppFilter {
    pub fn new<S: AsRef<str>>(app_patterns: &[S], test_patterns: &[S]) -> Result<Self> {
        let app_patterns: Vec<String> = app_patterns
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        let test_patterns: Vec<String> = test_patterns
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect();
        Ok(AppFilter {
            app: glob_set(&app_patterns)?,
            tests: glob_set(&test_patterns)?,
            app_patterns,
            test_patterns,
        })
    }

    pub fn is_test(&self, rel: &str) -> bool {
        self.tests.is_match(rel)
    }

    pub fn is_app(&self, rel: &str) -> bool {
        self.app.is_match(rel) && !self.is_test(rel)
    }

    pub fn app_patterns(&self) -> &[String] {
        &self.app_patterns
    }

    pub fn test_patterns(&self) -> &[String] {
        &self.test_patterns
    }
}

impl Default for AppFilter {
    fn default() -> Self {
        AppFilter::new(&["**/*.py"], DEFAULT_TEST_PATTERNS).expect("default globs are valid")
    }
}

fn skipped_dir(name: &str) -> bool {
    name.starts_with('.') || name == "__pycache__" || name == "site-packages"
}

/// Project-relative paths of every Python source under `root`, sorted.
pub fn python_sources(root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let walker = WalkDir::new(root).into_iter().filter_entry(|e| {
        e.depth() == 0 || !(e.file_type().is_dir() && skipped_dir(&e.file_name().to_string_lossy()))
    });
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e
                .path()
                .map(Path::to_path_buf)
                .unwrap_or_else(|| root.to_path_buf());
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "py") {
            let rel = entry
                .path()
                .strip_prefix(root)
                .expect("walkdir yields paths under root");
            out.push(
                rel.components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
            );
        }
    }
    out.sort();
    Ok(out)
}

/// Content hash over every Python source in the project.
pub fn fingerprint(root: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for rel in python_sources(root)? {
        let path = root.join(&rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        h.update(rel.as_bytes());
        h.update([0]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

pub(crate) fn read_source(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn parse_file(root: &Path, rel: &str) -> Result<(String, Vec<TryStatement>)> {
    let path = root.join(rel);
    let text = read_source(&path)?;
    let stmts = python::try_statements(&text).map_err(|e| Error::Parse {
        file: PathBuf::from(rel),
        line: e.line,
        col: e.col,
        message: e.message,
    })?;
    Ok((text, stmts))
}

pub(crate) fn sites_of(rel: &str, stmt: &TryStatement) -> Vec<TryCatchSite> {
    let try_span = SourceSpan {
        start_line: stmt.line,
        start_col: stmt.col,
        end_line: stmt.body.end_line,
        end_col: stmt.body.end_col,
    };
    stmt.handlers
        .iter()
        .enumerate()
        .map(|(ordinal, h)| TryCatchSite {
            site_id: SiteId::derive(rel, stmt.line, stmt.col, ordinal),
            file: rel.to_string(),
            try_span,
            catch_span: SourceSpan {
                start_line: h.clause.line,
                start_col: h.clause.col,
                end_line: h.clause.end_line,
                end_col: h.clause.end_col,
            },
            caught_types: h.types.clone(),
            catch_ordinal: ordinal,
            function: stmt.function.clone(),
        })
        .collect()
}

/// One site per (try, handler) pair in application code.
pub fn enumerate_sites(project_root: &Path, filter: &AppFilter) -> Result<SiteInventory> {
    let app_files: Vec<String> = python_sources(project_root)?
        .into_iter()
        .filter(|rel| filter.is_app(rel))
        .collect();
    if app_files.is_empty() {
        return Err(Error::EmptyProject(project_root.to_path_buf()));
    }
    let mut sites = Vec::new();
    for rel in &app_files {
        let (_, stmts) = parse_file(project_root, rel)?;
        for stmt in &stmts {
            sites.extend(sites_of(rel, stmt));
        }
    }
    let mut seen = std::collections::HashSet::new();
    for s in &sites {
        if !seen.insert(&s.site_id) {
            return Err(Error::Config(format!("site id collision on {}", s.site_id)));
        }
    }
    Ok(SiteInventory {
        project_fingerprint: fingerprint(project_root)?,
        sites,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn project(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (rel, text) in files {
            let path = dir.path().join(rel);
            fs::create_dir_all(path.parent().unwrap()).unwrap();
            fs::write(path, text).unwrap();
        }
        dir
    }

    const TWO_HANDLERS: &str = "\
def foo(x):
    try:
        return int(x)
    except ValueError:
        return 0
    except (TypeError, KeyError):
        return -1
";

    #[test]
    fn one_try_two_handlers_share_try_span() {
        let dir = project(&[("app/m.py", TWO_HANDLERS)]);
        let inv = enumerate_sites(dir.path(), &AppFilter::default()).unwrap();
        assert_eq!(inv.sites.len(), 2);
        assert_eq!(inv.sites[0].try_span, inv.sites[1].try_span);
        assert_ne!(inv.sites[0].site_id, inv.sites[1].site_id);
        assert_eq!(inv.sites[1].caught_types, vec!["TypeError", "KeyError"]);
        assert_eq!(inv.sites[0].function, "foo");
    }

    #[test]
    fn zero_try_statements_is_an_empty_inventory() {
        let dir = project(&[("app/m.py", "x = 1\n")]);
        let inv = enumerate_sites(dir.path(), &AppFilter::default()).unwrap();
        assert!(inv.sites.is_empty());
    }

    #[test]
    fn empty_project_is_an_error() {
        let dir = project(&[("tests/test_x.py", "def test_a():\n    pass\n")]);
        let err = enumerate_sites(dir.path(), &AppFilter::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyProject(_)));
    }

    #[test]
    fn test_code_is_excluded() {
        let body = "try:\n    a()\nexcept E:\n    pass\n";
        let dir = project(&[
            ("app/m.py", body),
            ("tests/helpers.py", body),
            ("app/test_m.py", body),
        ]);
        let filter = AppFilter::default();
        let inv = enumerate_sites(dir.path(), &filter).unwrap();
        assert_eq!(inv.sites.len(), 1);
        assert!(inv.sites.iter().all(|s| !filter.is_test(&s.file)));
    }

    #[test]
    fn unparseable_file_names_file_and_position() {
        let dir = project(&[("app/bad.py", "def f():\n    x = (1,\n")]);
        let err = enumerate_sites(dir.path(), &AppFilter::default()).unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert_eq!(file, PathBuf::from("app/bad.py"));
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lookup_round_trip_and_not_found() {
        let dir = project(&[("app/m.py", TWO_HANDLERS)]);
        let inv = enumerate_sites(dir.path(), &AppFilter::default()).unwrap();
        let id = inv.sites[1].site_id.clone();
        assert_eq!(site_lookup(&inv, &id).unwrap(), &inv.sites[1]);
        assert!(matches!(
            site_lookup(&inv, &SiteId::new("nonexistent")),
            Err(Error::SiteNotFound(_))
        ));
        let again = enumerate_sites(dir.path(), &AppFilter::default()).unwrap();
        assert_eq!(site_lookup(&again, &id).unwrap(), &inv.sites[1]);
    }

    #[test]
    fn ids_survive_unrelated_edits() {
        let dir = project(&[("app/m.py", TWO_HANDLERS)]);
        let before = enumerate_sites(dir.path(), &AppFilter::default()).unwrap();
        fs::write(
            dir.path().join("app/m.py"),
            format!("{TWO_HANDLERS}\ndef other():\n    return 1\n"),
        )
        .unwrap();
        let after = enumerate_sites(dir.path(), &AppFilter::default()).unwrap();
        assert_eq!(before.sites, after.sites);
        assert_ne!(before.project_fingerprint, after.project_fingerprint);
    }

    #[test]
    fn inventory_json_shape() {
        let dir = project(&[("app/m.py", TWO_HANDLERS)]);
        let inv = enumerate_sites(dir.path(), &AppFilter::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&inv.to_json().unwrap()).unwrap();
        let site = &v["sites"][0];
        for key in [
            "site_id",
            "file",
            "try",
            "catch",
            "caught_types",
            "catch_ordinal",
            "function",
        ] {
            assert!(site.get(key).is_some(), "missing {key}");
        }
        assert_eq!(site["try"]["start_line"], 2);
        assert_eq!(
            SiteInventory::from_json(&inv.to_json().unwrap()).unwrap(),
            inv
        );
    }
}
