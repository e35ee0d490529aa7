//! Catch stretching: widening a handler's declared types to `Exception` and
//! keeping the change only when the full test suite still passes.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use similar::TextDiff;

use crate::color::{Color, TestRecord};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::harness::Verdict;
use crate::python;
use crate::site::{self, SiteId, SiteInventory, TryCatchSite, STRETCH_TYPE};
use crate::trace::{TraceLog, UsageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StretchCase {
    /// No exception ever traversed the try uncaught.
    A,
    /// Uncaught traversals were caught by another application handler.
    BCaughtUpstream,
    /// An uncaught traversal reached a blue test.
    BBubblesToBlue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StretchCandidate {
    pub site_id: SiteId,
    pub original_types: Vec<String>,
    pub stretched_type: String,
    pub case: StretchCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Decision {
    Stretched,
    RejectedByTests,
    SkippedBlue,
    SkippedAlreadyGeneric,
}

impl StretchCase {
    pub fn as_str(self) -> &'static str {
        match self {
            StretchCase::A => "A",
            StretchCase::BCaughtUpstream => "B_CAUGHT_UPSTREAM",
            StretchCase::BBubblesToBlue => "B_BUBBLES_TO_BLUE",
        }
    }
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Stretched => "STRETCHED",
            Decision::RejectedByTests => "REJECTED_BY_TESTS",
            Decision::SkippedBlue => "SKIPPED_BLUE",
            Decision::SkippedAlreadyGeneric => "SKIPPED_ALREADY_GENERIC",
        }
    }
}

pub const INTERPLAY: &str = "INTERPLAY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StretchResult {
    pub candidate: StretchCandidate,
    pub decision: Decision,
    pub failing_tests: Vec<String>,
    /// `INTERPLAY` when the stretch passed alone but was rolled back in the
    /// combined run.
    pub reason: Option<String>,
    /// Unified diff of the single stretch.
    pub patch: Option<String>,
}

/// Runs the full, uninstrumented suite of a project tree.
pub trait SuiteRunner: Sync {
    fn run_full(&self, root: &Path) -> Result<BTreeMap<String, Verdict>>;
}

fn failing(verdicts: &BTreeMap<String, Verdict>) -> Vec<String> {
    verdicts
        .iter()
        .filter(|(_, v)| matches!(v, Verdict::Fail | Verdict::Error))
        .map(|(t, _)| t.clone())
        .collect()
}

pub fn classify_candidate(
    site: &TryCatchSite,
    trace: &TraceLog,
    records: &[TestRecord],
) -> StretchCandidate {
    let blue_tests: BTreeSet<&str> = records
        .iter()
        .filter(|r| r.color == Color::Blue)
        .map(|r| r.test_id.as_str())
        .collect();
    let mut case = StretchCase::A;
    for e in trace
        .events
        .iter()
        .filter(|e| e.site_id == site.site_id && e.kind == UsageKind::Blue)
    {
        case = StretchCase::BCaughtUpstream;
        let reached_test = blue_tests.contains(e.test_id.as_str())
            && trace.bubbles_of(&e.test_id).any(|b| Some(b.xid) == e.xid);
        if reached_test {
            case = StretchCase::BBubblesToBlue;
            break;
        }
    }
    StretchCandidate {
        site_id: site.site_id.clone(),
        original_types: site.caught_types.clone(),
        stretched_type: STRETCH_TYPE.to_string(),
        case,
    }
}

/// One stretched file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilePatch {
    pub file: String,
    pub original: String,
    pub patched: String,
}

impl FilePatch {
    pub fn unified_diff(&self) -> String {
        TextDiff::from_lines(&self.original, &self.patched)
            .unified_diff()
            .context_radius(3)
            .header(&format!("a/{}", self.file), &format!("b/{}", self.file))
            .to_string()
    }
}

/// Replaces the declared types of every given clause of one file's source.
fn stretch_source(text: &str, file: &str, sites: &[&TryCatchSite]) -> Result<String> {
    let stmts = python::try_statements(text).map_err(|e| Error::Parse {
        file: PathBuf::from(file),
        line: e.line,
        col: e.col,
        message: e.message,
    })?;
    let mut ranges = Vec::new();
    for s in sites {
        let handler = stmts
            .iter()
            .find(|t| t.line == s.try_span.start_line && t.col == s.try_span.start_col)
            .and_then(|t| t.handlers.get(s.catch_ordinal))
            .ok_or_else(|| Error::SiteNotFound(s.site_id.to_string()))?;
        if let Some(r) = &handler.type_range {
            ranges.push(r.clone());
        }
    }
    ranges.sort_by_key(|r| r.start);
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0;
    for r in ranges {
        out.push_str(&text[cursor..r.start]);
        out.push_str(STRETCH_TYPE);
        cursor = r.end;
    }
    out.push_str(&text[cursor..]);
    Ok(out)
}

/// Patches for stretching all `sites`, one per touched file. Generic clauses
/// are left alone.
pub fn stretch_patches(project_root: &Path, sites: &[&TryCatchSite]) -> Result<Vec<FilePatch>> {
    let mut by_file: BTreeMap<&str, Vec<&TryCatchSite>> = BTreeMap::new();
    for s in sites.iter().filter(|s| !s.is_generic()) {
        by_file.entry(s.file.as_str()).or_default().push(s);
    }
    by_file
        .into_iter()
        .map(|(file, group)| {
            let original = site::read_source(&project_root.join(file))?;
            let patched = stretch_source(&original, file, &group)?;
            Ok(FilePatch {
                file: file.to_string(),
                original,
                patched,
            })
        })
        .collect()
}

/// Copies the project to `out_root` with every given clause stretched.
pub fn apply_stretches(
    project_root: &Path,
    sites: &[&TryCatchSite],
    out_root: &Path,
) -> Result<Vec<FilePatch>> {
    let patches = stretch_patches(project_root, sites)?;
    if out_root.exists() {
        fs::remove_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    }
    fsutil::copy_tree(project_root, out_root)?;
    for p in &patches {
        let path = out_root.join(&p.file);
        fs::write(&path, &p.patched).map_err(|e| Error::io(&path, e))?;
    }
    Ok(patches)
}

/// Copies the project with one clause stretched. `None` when the clause
/// already catches the root type; nothing is written then.
pub fn apply_stretch(
    project_root: &Path,
    site: &TryCatchSite,
    out_root: &Path,
) -> Result<Option<FilePatch>> {
    if site.is_generic() {
        return Ok(None);
    }
    Ok(apply_stretches(project_root, &[site], out_root)?.pop())
}

fn result(candidate: &StretchCandidate, decision: Decision) -> StretchResult {
    StretchResult {
        candidate: candidate.clone(),
        decision,
        failing_tests: Vec::new(),
        reason: None,
        patch: None,
    }
}

/// Stretches one candidate in a scratch copy and runs the full suite.
pub fn validate_stretch(
    project_root: &Path,
    site: &TryCatchSite,
    candidate: &StretchCandidate,
    runner: &dyn SuiteRunner,
    scratch: &Path,
) -> Result<StretchResult> {
    if site.is_generic() {
        return Ok(result(candidate, Decision::SkippedAlreadyGeneric));
    }
    if candidate.case == StretchCase::BBubblesToBlue {
        return Ok(result(candidate, Decision::SkippedBlue));
    }
    let copy = scratch.join(site.site_id.as_str());
    let patch =
        apply_stretch(project_root, site, &copy)?.expect("non-generic clause yields a patch");
    let failing_tests = failing(&runner.run_full(&copy)?);
    let _ = fs::remove_dir_all(&copy);
    Ok(StretchResult {
        candidate: candidate.clone(),
        decision: if failing_tests.is_empty() {
            Decision::Stretched
        } else {
            Decision::RejectedByTests
        },
        failing_tests,
        reason: None,
        patch: Some(patch.unified_diff()),
    })
}

/// Validates candidates independently, `jobs` at a time. Results keep the
/// candidates' order.
pub fn validate_all(
    project_root: &Path,
    inventory: &SiteInventory,
    candidates: &[StretchCandidate],
    runner: &dyn SuiteRunner,
    scratch: &Path,
    jobs: usize,
) -> Result<Vec<StretchResult>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        candidates
            .par_iter()
            .map(|c| {
                validate_stretch(
                    project_root,
                    inventory.lookup(&c.site_id)?,
                    c,
                    runner,
                    scratch,
                )
            })
            .collect()
    })
}

#[derive(Debug, Clone)]
pub struct CombinedOutcome {
    /// Project copy with every surviving stretch applied; `None` when nothing
    /// was stretched.
    pub root: Option<PathBuf>,
    pub combined_diff: String,
    /// Suite runs performed, including the final passing one.
    pub runs: usize,
}

/// Applies every accepted stretch at once. While the suite fails, the most
/// recently accepted stretch is rolled back and marked as an interplay
/// rejection.
pub fn validate_combined(
    project_root: &Path,
    inventory: &SiteInventory,
    results: &mut [StretchResult],
    runner: &dyn SuiteRunner,
    out_root: &Path,
) -> Result<CombinedOutcome> {
    let mut accepted: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| r.decision == Decision::Stretched)
        .map(|(i, _)| i)
        .collect();
    let mut runs = 0;
    while !accepted.is_empty() {
        let sites = accepted
            .iter()
            .map(|&i| inventory.lookup(&results[i].candidate.site_id))
            .collect::<Result<Vec<_>>>()?;
        let patches = apply_stretches(project_root, &sites, out_root)?;
        runs += 1;
        let failing_tests = failing(&runner.run_full(out_root)?);
        if failing_tests.is_empty() {
            return Ok(CombinedOutcome {
                root: Some(out_root.to_path_buf()),
                combined_diff: patches.iter().map(FilePatch::unified_diff).collect(),
                runs,
            });
        }
        let last = accepted.pop().expect("non-empty");
        let r = &mut results[last];
        r.decision = Decision::RejectedByTests;
        r.reason = Some(INTERPLAY.to_string());
        r.failing_tests = failing_tests;
    }
    if out_root.exists() {
        fs::remove_dir_all(out_root).map_err(|e| Error::io(out_root, e))?;
    }
    Ok(CombinedOutcome {
        root: None,
        combined_diff: String::new(),
        runs,
    })
}
