//! End-to-end analysis: enumerate, instrument, baseline twice, color, sweep,
//! evaluate, optionally stretch, and persist every artifact.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::color::{color_tests, compute_stats};
use crate::coverage::{build_coverage_index, CoverageIndex};
use crate::engine::{self, Cell, InjectionMatrix, InjectionOutcome, InjectionRunner, Status};
use crate::error::{Error, Result};
use crate::harness::{Harness, LaunchKind, Selection, TestCommand, Verdict, DEFAULT_TEST_COMMAND};
use crate::instrument::{self, InjectionPlan, SupportFiles};
use crate::report::{
    render_report, Annotation, Format, Report, SiteRow, StretchSection, Summary, Timing,
    Uninjectable, NOTES,
};
use crate::site::{
    self, enumerate_sites, AppFilter, SiteInventory, TryCatchSite, DEFAULT_TEST_PATTERNS,
};
use crate::stretch::{self, Decision, SuiteRunner};
use crate::trace::TraceLog;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub project_root: PathBuf,
    pub test_command: String,
    pub app_patterns: Vec<String>,
    pub test_patterns: Vec<String>,
    /// Per-test budget in seconds.
    pub timeout: f64,
    pub jobs: usize,
    pub stretch: bool,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
}

impl RunConfig {
    pub fn new(project_root: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            project_root: project_root.into(),
            test_command: DEFAULT_TEST_COMMAND.to_string(),
            app_patterns: vec!["**/*.py".into()],
            test_patterns: DEFAULT_TEST_PATTERNS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            timeout: 10.0,
            jobs: 1,
            stretch: false,
            out_dir: out_dir.into(),
            formats: vec![Format::Json, Format::Markdown],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.timeout.is_finite() || self.timeout <= 0.0 {
            return Err(Error::Config(format!(
                "timeout must be positive, got {}",
                self.timeout
            )));
        }
        if self.jobs < 1 {
            return Err(Error::Config("worker count must be at least 1".into()));
        }
        if !self.project_root.is_dir() {
            return Err(Error::Config(format!(
                "{} is not a directory",
                self.project_root.display()
            )));
        }
        Ok(())
    }

    fn filter(&self) -> Result<AppFilter> {
        AppFilter::new(&self.app_patterns, &self.test_patterns)
    }
}

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub out_dir: PathBuf,
}

impl Artifacts {
    pub fn inventory(&self) -> PathBuf {
        self.out_dir.join("inventory.json")
    }
    pub fn trace(&self) -> PathBuf {
        self.out_dir.join("trace.log")
    }
    pub fn matrix(&self) -> PathBuf {
        self.out_dir.join("matrix.json")
    }
    pub fn report(&self, format: Format) -> PathBuf {
        self.out_dir.join(format.file_name())
    }
    pub fn patches(&self) -> PathBuf {
        self.out_dir.join("patches")
    }
    pub fn work(&self) -> PathBuf {
        self.out_dir.join("work")
    }
    pub fn instrumented(&self) -> PathBuf {
        self.work().join("instrumented")
    }
    /// Project copy with every accepted stretch applied.
    pub fn stretched(&self) -> PathBuf {
        self.work().join("stretched")
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn canonical(path: &Path) -> Result<PathBuf> {
    path.canonicalize().map_err(|e| Error::io(path, e))
}

/// Runs one covering test against the instrumented project.
struct Injector<'a> {
    harness: &'a Harness,
    root: &'a Path,
}

impl InjectionRunner for Injector<'_> {
    fn run_injected(
        &self,
        site: &TryCatchSite,
        exception_type: &str,
        test_id: &str,
    ) -> Result<InjectionOutcome> {
        let plan = InjectionPlan::inject(site.site_id.clone(), exception_type);
        let run = self.harness.run_suite(
            self.root,
            Some(&plan),
            &Selection::one(test_id),
            LaunchKind::Injected,
        )?;
        let cell = match run.verdicts.get(test_id) {
            Some(Verdict::Pass) => Cell::Pass,
            Some(Verdict::Fail) => Cell::Fail,
            _ => Cell::Error,
        };
        Ok(InjectionOutcome {
            cell,
            uninjectable: run.trace.uninjectable.first().map(|u| u.reason.clone()),
        })
    }
}

/// Runs the full uninstrumented suite of a (stretched) project copy.
struct Validator<'a> {
    harness: &'a Harness,
}

impl SuiteRunner for Validator<'_> {
    fn run_full(&self, root: &Path) -> Result<BTreeMap<String, Verdict>> {
        Ok(self
            .harness
            .run_suite(root, None, &Selection::All, LaunchKind::Validation)?
            .verdicts)
    }
}

fn excluded_tests(flaky: &[String], verdicts: &BTreeMap<String, Verdict>) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = flaky.iter().cloned().collect();
    out.extend(
        verdicts
            .iter()
            .filter(|(_, v)| **v == Verdict::Skip)
            .map(|(t, _)| t.clone()),
    );
    out
}

pub fn run_pipeline(config: &RunConfig) -> Result<Report> {
    let started = Instant::now();
    config.validate()?;
    let command = TestCommand::parse(&config.test_command)?;
    let filter = config.filter()?;
    let root = canonical(&config.project_root)?;
    fs::create_dir_all(&config.out_dir).map_err(|e| Error::io(&config.out_dir, e))?;
    let art = Artifacts {
        out_dir: canonical(&config.out_dir)?,
    };
    if root.starts_with(&art.out_dir) || art.out_dir.starts_with(&root) {
        return Err(Error::Config(
            "output directory must lie outside the project".into(),
        ));
    }
    let work = art.work();
    if work.exists() {
        fs::remove_dir_all(&work).map_err(|e| Error::io(&work, e))?;
    }

    let inventory = enumerate_sites(&root, &filter)?;
    write(&art.inventory(), &inventory.to_json()?)?;
    let instrumented = instrument::instrument(&root, &inventory, &art.instrumented())?;
    let app_files: Vec<String> = site::python_sources(&instrumented.root)?
        .into_iter()
        .filter(|rel| filter.is_app(rel))
        .map(|rel| instrumented.root.join(rel).to_string_lossy().into_owned())
        .collect();
    let support = SupportFiles::write(&work.join("support"), &app_files)?;
    let harness = Harness::new(command, support, config.timeout, &work.join("runs"))?;

    let t = Instant::now();
    let baseline = harness.run_suite(&root, None, &Selection::All, LaunchKind::Baseline)?;
    if !baseline.is_green() {
        return Err(Error::RedBaseline(baseline.failing()));
    }
    let baseline_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let standard = harness.run_suite(
        &instrumented.root,
        Some(&InjectionPlan::none()),
        &Selection::All,
        LaunchKind::Standard,
    )?;
    let standard_seconds = t.elapsed().as_secs_f64();
    let trace = standard.trace;
    trace.validate_sites(&inventory)?;
    if let Some(p) = &standard.trace_path {
        fs::copy(p, art.trace()).map_err(|e| Error::io(art.trace(), e))?;
    }
    let tests: BTreeSet<&String> = baseline
        .verdicts
        .keys()
        .chain(standard.verdicts.keys())
        .collect();
    let flaky: Vec<String> = tests
        .into_iter()
        .filter(|t| baseline.verdicts.get(*t) != standard.verdicts.get(*t))
        .cloned()
        .collect();
    let records = color_tests(&standard.verdicts, &trace);
    let stats = compute_stats(&records);
    let skipped: Vec<String> = standard
        .verdicts
        .iter()
        .filter(|(_, v)| **v == Verdict::Skip)
        .map(|(t, _)| t.clone())
        .collect();
    let coverage =
        build_coverage_index(&trace).without_tests(&excluded_tests(&flaky, &standard.verdicts));

    let t = Instant::now();
    let injector = Injector {
        harness: &harness,
        root: &instrumented.root,
    };
    let matrix = engine::short_circuit(&inventory, &coverage, &injector, config.jobs)?;
    write(&art.matrix(), &matrix.to_json()?)?;
    let verdicts = engine::evaluate(&inventory, &coverage, &matrix);
    let sweep_seconds = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut decisions: BTreeMap<_, Decision> = BTreeMap::new();
    let stretch_section = if config.stretch {
        let candidates: Vec<_> = inventory
            .sites
            .iter()
            .zip(&verdicts)
            .filter(|(_, v)| v.source_independence == Status::Satisfied)
            .map(|(s, _)| stretch::classify_candidate(s, &trace, &records))
            .collect();
        let validator = Validator { harness: &harness };
        let mut results = stretch::validate_all(
            &root,
            &inventory,
            &candidates,
            &validator,
            &work.join("stretch"),
            config.jobs,
        )?;
        let combined = stretch::validate_combined(
            &root,
            &inventory,
            &mut results,
            &validator,
            &art.stretched(),
        )?;
        let patches = art.patches();
        if patches.exists() {
            fs::remove_dir_all(&patches).map_err(|e| Error::io(&patches, e))?;
        }
        fs::create_dir_all(&patches).map_err(|e| Error::io(&patches, e))?;
        for r in &results {
            decisions.insert(r.candidate.site_id.clone(), r.decision);
            if let (Decision::Stretched, Some(diff)) = (r.decision, &r.patch) {
                write(&patches.join(format!("{}.diff", r.candidate.site_id)), diff)?;
            }
        }
        write(&patches.join("combined.diff"), &combined.combined_diff)?;
        Some(StretchSection {
            results,
            combined_runs: combined.runs,
            rollback_order: "most recently accepted first".into(),
        })
    } else {
        None
    };
    let stretch_seconds = t.elapsed().as_secs_f64();

    let sites: Vec<SiteRow> = inventory
        .sites
        .iter()
        .zip(verdicts)
        .map(|(s, v)| {
            let covering = coverage.covering_tests(&s.site_id).len();
            SiteRow::new(s, covering, v, decisions.get(&s.site_id).copied())
        })
        .collect();
    let report = Report {
        project: root.file_name().map_or_else(
            || root.display().to_string(),
            |n| n.to_string_lossy().into_owned(),
        ),
        stats,
        tests: records,
        summary: Summary::of(&sites, config.stretch),
        sites,
        stretch: stretch_section,
        flaky_tests: flaky,
        skipped_tests: skipped,
        uninjectable: matrix
            .uninjectable
            .iter()
            .map(|(k, r)| Uninjectable {
                row: k.to_string(),
                reason: r.clone(),
            })
            .collect(),
        annotations: matrix
            .annotations
            .iter()
            .map(|(k, t, m)| Annotation {
                row: k.to_string(),
                test_id: t.clone(),
                message: m.clone(),
            })
            .collect(),
        launches: harness.launches(),
        timing: Timing {
            baseline_seconds,
            standard_seconds,
            sweep_seconds,
            stretch_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
        },
        notes: NOTES.iter().map(|s| s.to_string()).collect(),
    };
    for &f in &config.formats {
        write(&art.report(f), &render_report(&report, f)?)?;
    }
    Ok(report)
}

/// Re-evaluates verdicts from persisted artifacts without running anything.
pub fn evaluate_from_artifacts(
    out_dir: &Path,
) -> Result<(SiteInventory, CoverageIndex, Vec<engine::ContractVerdict>)> {
    let art = Artifacts {
        out_dir: out_dir.to_path_buf(),
    };
    let read = |p: PathBuf| site::read_source(&p);
    let inventory = SiteInventory::from_json(&read(art.inventory())?)?;
    let report = crate::report::parse_report(&read(art.report(Format::Json))?)?;
    let trace = TraceLog::read(&art.trace())?;
    let mut matrix = InjectionMatrix::from_json(&read(art.matrix())?)?;
    for u in &report.uninjectable {
        matrix.uninjectable.insert(u.row.parse()?, u.reason.clone());
    }
    let mut excluded: BTreeSet<String> = report.flaky_tests.iter().cloned().collect();
    excluded.extend(report.skipped_tests.iter().cloned());
    let coverage = build_coverage_index(&trace).without_tests(&excluded);
    let verdicts = engine::evaluate(&inventory, &coverage, &matrix);
    Ok((inventory, coverage, verdicts))
}

/// CI gate for `--fail-on`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailOn {
    SourceDependent,
    NotResilient,
}

impl std::str::FromStr for FailOn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source-dependent" => Ok(FailOn::SourceDependent),
            "not-resilient" => Ok(FailOn::NotResilient),
            other => Err(Error::Config(format!("unknown --fail-on value `{other}`"))),
        }
    }
}

impl FailOn {
    pub fn triggered(self, report: &Report) -> bool {
        report.sites.iter().any(|r| match self {
            FailOn::SourceDependent => r.verdict.source_independence == Status::Violated,
            FailOn::NotResilient => r.verdict.pure_resilience == Status::Violated,
        })
    }
}
