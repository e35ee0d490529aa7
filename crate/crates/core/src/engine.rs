//! Short-circuit testing and contract verdicts.
//!
//! For every executed site and every declared caught type, each covering test
//! is re-run with an exception of that type thrown at the top of the site's
//! `try`. The outcomes form the injection matrix, over which four predicates
//! are evaluated per row:
//!
//! * independent: every covering test with a white usage passes,
//! * dependent: some covering test whose usages are all white fails,
//! * resilient: every covering test passes and one has a pink usage,
//! * not resilient: some covering test fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::CoverageIndex;
use crate::error::{Error, Result};
use crate::site::{SiteId, SiteInventory, TryCatchSite};
use crate::trace::UsageKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Pass,
    Fail,
    Error,
}

impl Cell {
    pub fn passed(self) -> bool {
        self == Cell::Pass
    }
}

/// One matrix row: a site, and the injected type when its clause declares
/// more than one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowKey {
    pub site_id: SiteId,
    pub exception_type: Option<String>,
}

impl RowKey {
    pub fn rows_of(site: &TryCatchSite) -> Vec<RowKey> {
        if site.caught_types.len() == 1 {
            vec![RowKey {
                site_id: site.site_id.clone(),
                exception_type: None,
            }]
        } else {
            site.caught_types
                .iter()
                .map(|t| RowKey {
                    site_id: site.site_id.clone(),
                    exception_type: Some(t.clone()),
                })
                .collect()
        }
    }

    /// The type thrown for this row.
    pub fn injected_type<'a>(&'a self, site: &'a TryCatchSite) -> &'a str {
        self.exception_type
            .as_deref()
            .unwrap_or(&site.caught_types[0])
    }
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.exception_type {
            None => write!(f, "{}", self.site_id),
            Some(t) => write!(f, "{}:{t}", self.site_id),
        }
    }
}

impl FromStr for RowKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (site, ty) = match s.split_once(':') {
            Some((site, ty)) if !ty.is_empty() => (site, Some(ty.to_string())),
            Some(_) => return Err(Error::Config(format!("bad matrix row `{s}`"))),
            None => (s, None),
        };
        if site.is_empty() {
            return Err(Error::Config(format!("bad matrix row `{s}`")));
        }
        Ok(RowKey {
            site_id: SiteId::new(site),
            exception_type: ty,
        })
    }
}

/// Outcome of each (row, covering test) injected run. Absent cells were not
/// run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InjectionMatrix {
    pub rows: BTreeMap<RowKey, BTreeMap<String, Cell>>,
    /// Rows whose exception could not be constructed, with the reason.
    pub uninjectable: BTreeMap<RowKey, String>,
    /// Runner failures, recorded as error cells.
    pub annotations: Vec<(RowKey, String, String)>,
}

impl InjectionMatrix {
    pub fn cell(&self, row: &RowKey, test: &str) -> Option<Cell> {
        self.rows.get(row).and_then(|r| r.get(test)).copied()
    }

    pub fn set(&mut self, row: RowKey, test: &str, cell: Cell) {
        self.rows
            .entry(row)
            .or_default()
            .insert(test.to_string(), cell);
    }

    pub fn runs(&self) -> usize {
        self.rows.values().map(BTreeMap::len).sum()
    }

    /// `{row: {test: "pass"|"fail"|"error"}}`
    pub fn to_json(&self) -> Result<String> {
        let doc: BTreeMap<String, &BTreeMap<String, Cell>> =
            self.rows.iter().map(|(k, v)| (k.to_string(), v)).collect();
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: BTreeMap<String, BTreeMap<String, Cell>> = serde_json::from_str(text)?;
        let mut m = InjectionMatrix::default();
        for (k, v) in doc {
            m.rows.insert(k.parse()?, v);
        }
        Ok(m)
    }
}

/// Runs one covering test with one injection plan in a fresh process.
pub trait InjectionRunner: Sync {
    fn run_injected(
        &self,
        site: &TryCatchSite,
        exception_type: &str,
        test_id: &str,
    ) -> Result<InjectionOutcome>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionOutcome {
    pub cell: Cell,
    /// Set when the runtime could not build the exception.
    pub uninjectable: Option<String>,
}

/// Fills the matrix with one injected run per (row, covering test). Sites
/// without covering tests get no row.
pub fn short_circuit(
    inventory: &SiteInventory,
    coverage: &CoverageIndex,
    runner: &dyn InjectionRunner,
    jobs: usize,
) -> Result<InjectionMatrix> {
    if jobs == 0 {
        return Err(Error::Config("worker count must be at least 1".into()));
    }
    let mut work = Vec::new();
    for site in &inventory.sites {
        for row in RowKey::rows_of(site) {
            for test in coverage.covering_tests(&site.site_id) {
                work.push((site, row.clone(), test));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<_> = pool.install(|| {
        work.par_iter()
            .map(|(site, row, test)| {
                (
                    row,
                    *test,
                    runner.run_injected(site, row.injected_type(site), test),
                )
            })
            .collect()
    });

    let mut m = InjectionMatrix::default();
    for (row, test, outcome) in results {
        match outcome {
            Ok(o) => {
                if let Some(reason) = o.uninjectable {
                    m.uninjectable.entry(row.clone()).or_insert(reason);
                }
                m.set(row.clone(), test, o.cell);
            }
            Err(e) => {
                m.annotations
                    .push((row.clone(), test.to_string(), e.to_string()));
                m.set(row.clone(), test, Cell::Error);
            }
        }
    }
    Ok(m)
}

/// Covering tests of a row that have a cell, with their standard-run usages.
fn evaluated<'a>(
    m: &'a InjectionMatrix,
    coverage: &'a CoverageIndex,
    row: &'a RowKey,
) -> impl Iterator<Item = (&'a [UsageKind], bool)> + 'a {
    coverage
        .entries(&row.site_id)
        .filter(|(_, usages)| !usages.is_empty())
        .filter_map(move |(test, usages)| m.cell(row, test).map(|c| (usages, c.passed())))
}

pub fn eval_source_independent(
    m: &InjectionMatrix,
    coverage: &CoverageIndex,
    row: &RowKey,
) -> bool {
    evaluated(m, coverage, row).all(|(usages, pass)| pass || !usages.contains(&UsageKind::White))
}

pub fn eval_source_dependent(m: &InjectionMatrix, coverage: &CoverageIndex, row: &RowKey) -> bool {
    evaluated(m, coverage, row)
        .any(|(usages, pass)| !pass && usages.iter().all(|&u| u == UsageKind::White))
}

pub fn eval_resilient(m: &InjectionMatrix, coverage: &CoverageIndex, row: &RowKey) -> bool {
    let mut any_pink = false;
    for (usages, pass) in evaluated(m, coverage, row) {
        if !pass {
            return false;
        }
        any_pink |= usages.contains(&UsageKind::Pink);
    }
    any_pink
}

pub fn eval_not_resilient(m: &InjectionMatrix, coverage: &CoverageIndex, row: &RowKey) -> bool {
    evaluated(m, coverage, row).any(|(_, pass)| !pass)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Satisfied,
    Violated,
    Unknown,
}

impl Status {
    /// Satisfied if `satisfied`, violated if `violated`, unknown otherwise.
    pub fn decide(satisfied: bool, violated: bool) -> Status {
        assert!(
            !(satisfied && violated),
            "satisfaction and violation predicates both hold"
        );
        match (satisfied, violated) {
            (true, _) => Status::Satisfied,
            (_, true) => Status::Violated,
            _ => Status::Unknown,
        }
    }

    /// All rows must be satisfied; one violation suffices.
    pub fn all(statuses: impl IntoIterator<Item = Status>) -> Status {
        let mut out = Status::Satisfied;
        for s in statuses {
            match s {
                Status::Violated => return Status::Violated,
                Status::Unknown => out = Status::Unknown,
                Status::Satisfied => {}
            }
        }
        out
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Satisfied => "SATISFIED",
            Status::Violated => "VIOLATED",
            Status::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicates {
    pub source_independent: bool,
    pub source_dependent: bool,
    pub resilient: bool,
    pub not_resilient: bool,
}

impl Predicates {
    pub fn evaluate(m: &InjectionMatrix, coverage: &CoverageIndex, row: &RowKey) -> Self {
        Predicates {
            source_independent: eval_source_independent(m, coverage, row),
            source_dependent: eval_source_dependent(m, coverage, row),
            resilient: eval_resilient(m, coverage, row),
            not_resilient: eval_not_resilient(m, coverage, row),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub row: String,
    pub test_id: String,
    pub usages: Vec<UsageKind>,
    pub cell: Cell,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowVerdict {
    pub row: String,
    pub predicates: Predicates,
    pub source_independence: Status,
    pub pure_resilience: Status,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractVerdict {
    pub site_id: SiteId,
    pub executed: bool,
    pub source_independence: Status,
    pub pure_resilience: Status,
    pub rows: Vec<RowVerdict>,
    pub evidence: Vec<Evidence>,
    /// Observations that do not affect the verdict.
    pub diagnostics: Vec<String>,
    pub uninjectable: bool,
}

fn row_verdict(m: &InjectionMatrix, coverage: &CoverageIndex, row: &RowKey) -> RowVerdict {
    let p = Predicates::evaluate(m, coverage, row);
    let has_white = evaluated(m, coverage, row).any(|(u, _)| u.contains(&UsageKind::White));
    RowVerdict {
        row: row.to_string(),
        predicates: p,
        source_independence: Status::decide(
            p.source_independent && (has_white || p.resilient),
            p.source_dependent,
        ),
        pure_resilience: Status::decide(p.resilient, p.not_resilient),
    }
}

/// Verdicts for one site from its matrix rows.
pub fn verdict(
    site: &TryCatchSite,
    m: &InjectionMatrix,
    coverage: &CoverageIndex,
) -> ContractVerdict {
    let keys = RowKey::rows_of(site);
    let uninjectable = keys.iter().any(|k| m.uninjectable.contains_key(k));
    let rows: Vec<RowVerdict> = keys.iter().map(|k| row_verdict(m, coverage, k)).collect();
    let mut evidence = Vec::new();
    let mut diagnostics = Vec::new();
    for k in &keys {
        for (test, usages) in coverage.entries(&site.site_id) {
            let Some(cell) = m.cell(k, test) else {
                continue;
            };
            let has_white = usages.contains(&UsageKind::White);
            let all_white = usages.iter().all(|&u| u == UsageKind::White);
            if !cell.passed() && has_white && !all_white {
                diagnostics.push(format!(
                    "{test} executes the catch and fails under injection of row {k}, but also has non-white usages"
                ));
            }
            evidence.push(Evidence {
                row: k.to_string(),
                test_id: test.to_string(),
                usages: usages.to_vec(),
                cell,
            });
        }
        if let Some(reason) = m.uninjectable.get(k) {
            diagnostics.push(format!("row {k} is uninjectable: {reason}"));
        }
    }
    let (independence, resilience) = if uninjectable {
        (Status::Unknown, Status::Unknown)
    } else {
        (
            Status::all(rows.iter().map(|r| r.source_independence)),
            Status::all(rows.iter().map(|r| r.pure_resilience)),
        )
    };
    ContractVerdict {
        site_id: site.site_id.clone(),
        executed: coverage.is_executed(&site.site_id),
        source_independence: independence,
        pure_resilience: resilience,
        rows,
        evidence,
        diagnostics,
        uninjectable,
    }
}

pub fn evaluate(
    inventory: &SiteInventory,
    coverage: &CoverageIndex,
    m: &InjectionMatrix,
) -> Vec<ContractVerdict> {
    inventory
        .sites
        .iter()
        .map(|s| verdict(s, m, coverage))
        .collect()
}

/// Tests whose injected cells are missing for an executed site.
pub fn missing_cells(
    inventory: &SiteInventory,
    coverage: &CoverageIndex,
    m: &InjectionMatrix,
) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for site in &inventory.sites {
        for k in RowKey::rows_of(site) {
            for t in coverage.covering_tests(&site.site_id) {
                if m.cell(&k, t).is_none() {
                    out.insert((k.to_string(), t.to_string()));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::site::SourceSpan;
    use UsageKind::*;

    fn site(id: &str, types: &[&str]) -> TryCatchSite {
        let span = SourceSpan {
            start_line: 1,
            start_col: 0,
            end_line: 1,
            end_col: 0,
        };
        TryCatchSite {
            site_id: SiteId::new(id),
            file: "m.py".into(),
            try_span: span,
            catch_span: span,
            caught_types: types.iter().map(|t| t.to_string()).collect(),
            catch_ordinal: 0,
            function: "f".into(),
        }
    }

    fn setup(
        tests: &[(&str, &[UsageKind], Cell)],
    ) -> (TryCatchSite, CoverageIndex, InjectionMatrix) {
        let s = site("x", &["E"]);
        let mut cov = CoverageIndex::default();
        let mut m = InjectionMatrix::default();
        for (t, usages, cell) in tests {
            for &u in usages.iter() {
                cov.record(s.site_id.clone(), t, u);
            }
            m.set(RowKey::rows_of(&s)[0].clone(), t, *cell);
        }
        (s, cov, m)
    }

    #[test]
    fn two_white_tests_passing_is_independent() {
        let (s, cov, m) = setup(&[
            ("a", &[White], Cell::Pass),
            ("b", &[White, White], Cell::Pass),
        ]);
        let v = verdict(&s, &m, &cov);
        assert_eq!(v.source_independence, Status::Satisfied);
        assert_eq!(v.pure_resilience, Status::Unknown);
    }

    #[test]
    fn white_pass_and_pink_only_failure() {
        let (s, cov, m) = setup(&[("a", &[White], Cell::Pass), ("b", &[Pink], Cell::Fail)]);
        let row = &RowKey::rows_of(&s)[0];
        assert!(eval_source_independent(&m, &cov, row));
        assert!(!eval_source_dependent(&m, &cov, row));
        assert!(eval_not_resilient(&m, &cov, row));
        let v = verdict(&s, &m, &cov);
        assert_eq!(v.source_independence, Status::Satisfied);
        assert_eq!(v.pure_resilience, Status::Violated);
    }

    #[test]
    fn mixed_usages_failing_is_only_a_diagnostic() {
        let (s, cov, m) = setup(&[("a", &[Pink, White], Cell::Fail)]);
        let row = &RowKey::rows_of(&s)[0];
        assert!(!eval_source_dependent(&m, &cov, row));
        let v = verdict(&s, &m, &cov);
        assert_eq!(v.source_independence, Status::Unknown);
        assert_eq!(v.diagnostics.len(), 1);
    }

    #[test]
    fn single_white_failure_is_dependent() {
        let (s, cov, m) = setup(&[("a", &[White], Cell::Error)]);
        assert_eq!(verdict(&s, &m, &cov).source_independence, Status::Violated);
    }

    #[test]
    fn pink_covered_all_passing_is_resilient() {
        let (s, cov, m) = setup(&[("a", &[Pink], Cell::Pass), ("b", &[White], Cell::Pass)]);
        let v = verdict(&s, &m, &cov);
        assert_eq!(v.pure_resilience, Status::Satisfied);
        assert_eq!(v.source_independence, Status::Satisfied);
        let (s, cov, m) = setup(&[("a", &[Pink], Cell::Pass)]);
        let v = verdict(&s, &m, &cov);
        assert_eq!(
            (v.pure_resilience, v.source_independence),
            (Status::Satisfied, Status::Satisfied)
        );
    }

    #[test]
    fn empty_row_is_unknown() {
        let (s, cov, m) = setup(&[]);
        let v = verdict(&s, &m, &cov);
        assert!(!v.executed);
        assert_eq!(
            (v.pure_resilience, v.source_independence),
            (Status::Unknown, Status::Unknown)
        );
    }

    #[test]
    fn multi_type_rows_combine_conjunctively() {
        let s = site("x", &["A", "B"]);
        let rows = RowKey::rows_of(&s);
        assert_eq!(
            rows.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
            ["x:A", "x:B"]
        );
        let mut cov = CoverageIndex::default();
        cov.record(s.site_id.clone(), "t", White);
        let mut m = InjectionMatrix::default();
        m.set(rows[0].clone(), "t", Cell::Pass);
        m.set(rows[1].clone(), "t", Cell::Fail);
        assert_eq!(verdict(&s, &m, &cov).source_independence, Status::Violated);
        m.set(rows[1].clone(), "t", Cell::Pass);
        assert_eq!(verdict(&s, &m, &cov).source_independence, Status::Satisfied);
        m.uninjectable.insert(rows[1].clone(), "sealed".into());
        let v = verdict(&s, &m, &cov);
        assert!(v.uninjectable);
        assert_eq!(v.source_independence, Status::Unknown);
    }

    #[test]
    fn matrix_json_round_trip() {
        let mut m = InjectionMatrix::default();
        m.set("abc".parse().unwrap(), "t1", Cell::Pass);
        m.set("abd:KeyError".parse().unwrap(), "t2", Cell::Error);
        let text = m.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["abc"]["t1"], "pass");
        assert_eq!(v["abd:KeyError"]["t2"], "error");
        assert_eq!(InjectionMatrix::from_json(&text).unwrap(), m);
        assert!("".parse::<RowKey>().is_err());
    }

    struct Fixed;

    impl InjectionRunner for Fixed {
        fn run_injected(&self, _: &TryCatchSite, ty: &str, test: &str) -> Result<InjectionOutcome> {
            match (ty, test) {
                (_, "broken") => Err(Error::Config("boom".into())),
                ("Sealed", _) => Ok(InjectionOutcome {
                    cell: Cell::Pass,
                    uninjectable: Some("sealed".into()),
                }),
                _ => Ok(InjectionOutcome {
                    cell: Cell::Pass,
                    uninjectable: None,
                }),
            }
        }
    }

    #[test]
    fn sweep_covers_exactly_the_covering_tests() {
        let inv = SiteInventory {
            project_fingerprint: String::new(),
            sites: vec![
                site("x", &["E"]),
                site("y", &["E", "Sealed"]),
                site("z", &["E"]),
            ],
        };
        let mut cov = CoverageIndex::default();
        for t in ["1", "5"] {
            cov.record(SiteId::new("x"), t, White);
        }
        cov.record(SiteId::new("y"), "broken", White);
        let m = short_circuit(&inv, &cov, &Fixed, 3).unwrap();
        let x: Vec<_> = m.rows[&"x".parse().unwrap()].keys().cloned().collect();
        assert_eq!(x, ["1", "5"]);
        assert_eq!(m.runs(), 4);
        assert_eq!(m.annotations.len(), 2);
        assert_eq!(m.cell(&"y:E".parse().unwrap(), "broken"), Some(Cell::Error));
        assert!(!m.rows.contains_key(&"z".parse().unwrap()));
        assert!(missing_cells(&inv, &cov, &m).is_empty());
        assert!(short_circuit(&inv, &cov, &Fixed, 0).is_err());
    }
}
