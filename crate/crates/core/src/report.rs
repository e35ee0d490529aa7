use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::color::{SuiteStats, TestRecord};
use crate::engine::{ContractVerdict, Status};
use crate::error::{Error, Result};
use crate::harness::LaunchCounts;
use crate::site::{SiteId, TryCatchSite};
use crate::stretch::{Decision, StretchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Markdown,
}

impl Format {
    pub fn file_name(self) -> &'static str {
        match self {
            Format::Json => "report.json",
            Format::Markdown => "report.md",
        }
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(Format::Json),
            "md" | "markdown" => Ok(Format::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteRow {
    pub site_id: SiteId,
    pub location: String,
    pub function: String,
    pub caught_types: Vec<String>,
    pub covering_tests: usize,
    pub verdict: ContractVerdict,
    pub stretch: Option<Decision>,
}

impl SiteRow {
    pub fn new(
        site: &TryCatchSite,
        covering_tests: usize,
        verdict: ContractVerdict,
        stretch: Option<Decision>,
    ) -> Self {
        SiteRow {
            site_id: site.site_id.clone(),
            location: site.location(),
            function: site.function.clone(),
            caught_types: site.caught_types.clone(),
            covering_tests,
            verdict,
            stretch,
        }
    }

    fn counted(&self) -> bool {
        self.verdict.executed && !self.verdict.uninjectable
    }
}

/// Site counts over the per-site table.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub sites: usize,
    pub executed: usize,
    pub purely_resilient: usize,
    pub source_independent: usize,
    pub source_dependent: usize,
    pub unknown_resilience: usize,
    pub unknown_independence: usize,
    pub uninjectable: usize,
    /// Stretch decisions that survived the combined run; `None` without
    /// stretching.
    pub stretchable: Option<usize>,
}

impl Summary {
    pub fn of(rows: &[SiteRow], stretched: bool) -> Self {
        let count = |f: &dyn Fn(&SiteRow) -> bool| rows.iter().filter(|r| f(r)).count();
        Summary {
            sites: rows.len(),
            executed: count(&|r| r.verdict.executed),
            purely_resilient: count(&|r| r.verdict.pure_resilience == Status::Satisfied),
            source_independent: count(&|r| r.verdict.source_independence == Status::Satisfied),
            source_dependent: count(&|r| r.verdict.source_independence == Status::Violated),
            unknown_resilience: count(&|r| {
                r.counted() && r.verdict.pure_resilience == Status::Unknown
            }),
            unknown_independence: count(&|r| {
                r.counted() && r.verdict.source_independence == Status::Unknown
            }),
            uninjectable: count(&|r| r.verdict.uninjectable),
            stretchable: stretched.then(|| count(&|r| r.stretch == Some(Decision::Stretched))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StretchSection {
    pub results: Vec<StretchResult>,
    pub combined_runs: usize,
    /// Rollback order used when the combined run fails.
    pub rollback_order: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Uninjectable {
    pub row: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub row: String,
    pub test_id: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub baseline_seconds: f64,
    pub standard_seconds: f64,
    pub sweep_seconds: f64,
    pub stretch_seconds: f64,
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub project: String,
    pub stats: SuiteStats,
    pub tests: Vec<TestRecord>,
    pub sites: Vec<SiteRow>,
    pub summary: Summary,
    #[serde(default)]
    pub stretch: Option<StretchSection>,
    /// Tests whose verdict differed between the uninstrumented and the
    /// instrumented baseline.
    pub flaky_tests: Vec<String>,
    pub skipped_tests: Vec<String>,
    pub uninjectable: Vec<Uninjectable>,
    pub annotations: Vec<Annotation>,
    pub launches: LaunchCounts,
    pub timing: Timing,
    pub notes: Vec<String>,
}

pub const NOTES: &[&str] = &[
    "Injection throws at the first statement of the try on every traversal during a covering test.",
    "Expected exceptions count distinct exception objects reaching test code.",
    "A failing test with both white and other usages is a diagnostic, not a dependence violation.",
    "Combined stretch validation rolls back the most recently accepted stretch first.",
];

fn site_cell(r: &SiteRow) -> String {
    format!(
        "`{}` {} `{}` except {}",
        r.site_id,
        r.location,
        r.function,
        r.caught_types.join(", ")
    )
}

fn stretch_cell(r: &SiteRow) -> &'static str {
    r.stretch.map_or("-", Decision::as_str)
}

fn status_cell(executed: bool, s: Status) -> String {
    if executed {
        s.to_string()
    } else {
        "UNKNOWN (unexecuted)".into()
    }
}

fn markdown(r: &Report) -> String {
    let s = &r.stats;
    let mut out = String::new();
    let _ = writeln!(out, "# Exception contracts: {}\n", r.project);
    out.push_str("## Test suite\n\n");
    out.push_str(
        "| tests | passing | blue | white | pink | expected exceptions | internal exceptions |\n",
    );
    out.push_str("|---|---|---|---|---|---|---|\n");
    let _ = writeln!(
        out,
        "| {} | {} | {} ({}%) | {} ({}%) | {} | {} | {} |\n",
        s.total_tests,
        s.passing,
        s.blue_count,
        s.blue_percent,
        s.white_count,
        s.white_percent,
        s.pink_count,
        s.expected_exceptions_total,
        s.internal_exceptions_total
    );

    out.push_str("## Try-catch sites\n\n");
    out.push_str("| site | resilience | independence | stretch |\n|---|---|---|---|\n");
    for row in &r.sites {
        let v = &row.verdict;
        let (res, ind) = if v.uninjectable {
            ("UNINJECTABLE".to_string(), "UNINJECTABLE".to_string())
        } else {
            (
                status_cell(v.executed, v.pure_resilience),
                status_cell(v.executed, v.source_independence),
            )
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            site_cell(row),
            res,
            ind,
            stretch_cell(row)
        );
    }
    out.push('\n');

    let m = &r.summary;
    out.push_str("## Summary\n\n");
    out.push_str("| executed | purely resilient | source independent | source dependent | unknown resilience | unknown independence | stretchable |\n");
    out.push_str("|---|---|---|---|---|---|---|\n");
    let stretchable = match m.stretchable {
        Some(k) => format!("{k}/{}", m.source_independent),
        None => "-".into(),
    };
    let _ = writeln!(
        out,
        "| {} | {} | {} | {} | {} | {} | {} |\n",
        m.executed,
        m.purely_resilient,
        m.source_independent,
        m.source_dependent,
        m.unknown_resilience,
        m.unknown_independence,
        stretchable
    );

    if let Some(st) = &r.stretch {
        out.push_str("## Catch stretching\n\n");
        out.push_str("| site | case | decision | failing tests |\n|---|---|---|---|\n");
        for x in &st.results {
            let decision = match &x.reason {
                Some(reason) => format!("{} ({reason})", x.decision.as_str()),
                None => x.decision.as_str().to_string(),
            };
            let _ = writeln!(
                out,
                "| `{}` | {} | {} | {} |",
                x.candidate.site_id,
                x.candidate.case.as_str(),
                decision,
                x.failing_tests.join(", ")
            );
        }
        out.push('\n');
    }

    let diagnostics: Vec<(&SiteId, &String)> = r
        .sites
        .iter()
        .flat_map(|row| {
            row.verdict
                .diagnostics
                .iter()
                .map(move |d| (&row.site_id, d))
        })
        .collect();
    if !diagnostics.is_empty() {
        out.push_str("## Diagnostics\n\n");
        for (id, d) in diagnostics {
            let _ = writeln!(out, "- `{id}`: {d}");
        }
        out.push('\n');
    }

    out.push_str("## Exclusions\n\n");
    let list = |v: &[String]| {
        if v.is_empty() {
            "none".to_string()
        } else {
            v.join(", ")
        }
    };
    let _ = writeln!(out, "- flaky tests: {}", list(&r.flaky_tests));
    let _ = writeln!(out, "- skipped tests: {}", list(&r.skipped_tests));
    let unin: Vec<String> = r
        .uninjectable
        .iter()
        .map(|u| format!("{} ({})", u.row, u.reason))
        .collect();
    let _ = writeln!(out, "- uninjectable rows: {}", list(&unin));
    for a in &r.annotations {
        let _ = writeln!(
            out,
            "- runner error on {} / {}: {}",
            a.row, a.test_id, a.message
        );
    }
    out.push('\n');

    let l = &r.launches;
    out.push_str("## Runs\n\n");
    let _ = writeln!(
        out,
        "{} baseline, {} standard, {} injected, {} validation; {:.1}s total\n",
        l.baseline, l.standard, l.injected, l.validation, r.timing.total_seconds
    );
    for n in &r.notes {
        let _ = writeln!(out, "- {n}");
    }
    out
}

pub fn render_report(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)?),
        Format::Markdown => Ok(markdown(report)),
    }
}

pub fn parse_report(json: &str) -> Result<Report> {
    Ok(serde_json::from_str(json)?)
}
