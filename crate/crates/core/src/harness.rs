//! Running the subject test suite and collecting per-test verdicts.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::error::{Error, Result};
use crate::instrument::{InjectionPlan, SupportFiles};
use crate::trace::TraceLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
    Skip,
}

pub const DEFAULT_TEST_COMMAND: &str =
    "python3 {runner} --junit {junit} --timeout {timeout} {tests}";

/// A test command with placeholders, split like a POSIX shell would but run
/// without one.
///
/// `{runner}` is the bundled runner script, `{junit}` the report it must
/// write, `{timeout}` the per-test budget in seconds and `{tests}` expands to
/// one argument per selected test id (nothing when the whole suite runs).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCommand {
    words: Vec<String>,
}

impl TestCommand {
    pub fn parse(template: &str) -> Result<Self> {
        let words = shlex::split(template)
            .filter(|w| !w.is_empty())
            .ok_or_else(|| Error::Config(format!("cannot split test command `{template}`")))?;
        if !words.iter().any(|w| w.contains("{junit}")) {
            return Err(Error::Config("test command must mention {junit}".into()));
        }
        Ok(TestCommand { words })
    }

    fn render(&self, runner: &Path, junit: &Path, timeout: f64, tests: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        for w in &self.words {
            if w == "{tests}" {
                out.extend(tests.iter().cloned());
                continue;
            }
            out.push(
                w.replace("{runner}", &runner.to_string_lossy())
                    .replace("{junit}", &junit.to_string_lossy())
                    .replace("{timeout}", &timeout.to_string()),
            );
        }
        out
    }
}

impl Default for TestCommand {
    fn default() -> Self {
        TestCommand::parse(DEFAULT_TEST_COMMAND).expect("default command is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selection {
    All,
    Tests(Vec<String>),
}

impl Selection {
    pub fn one(test_id: &str) -> Self {
        Selection::Tests(vec![test_id.to_string()])
    }
}

/// What a subject process launch is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LaunchKind {
    /// Uninstrumented run of the original project.
    Baseline,
    /// Instrumented run without injection.
    Standard,
    /// Instrumented run of one test with one injection plan.
    Injected,
    /// Uninstrumented run of a stretched project.
    Validation,
}

#[derive(Debug, Default)]
pub struct LaunchCounter {
    counts: [AtomicUsize; 4],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaunchCounts {
    pub baseline: usize,
    pub standard: usize,
    pub injected: usize,
    pub validation: usize,
}

impl LaunchCounter {
    fn slot(kind: LaunchKind) -> usize {
        match kind {
            LaunchKind::Baseline => 0,
            LaunchKind::Standard => 1,
            LaunchKind::Injected => 2,
            LaunchKind::Validation => 3,
        }
    }

    pub fn record(&self, kind: LaunchKind) {
        self.counts[Self::slot(kind)].fetch_add(1, Ordering::SeqCst);
    }

    pub fn get(&self, kind: LaunchKind) -> usize {
        self.counts[Self::slot(kind)].load(Ordering::SeqCst)
    }

    pub fn snapshot(&self) -> LaunchCounts {
        LaunchCounts {
            baseline: self.get(LaunchKind::Baseline),
            standard: self.get(LaunchKind::Standard),
            injected: self.get(LaunchKind::Injected),
            validation: self.get(LaunchKind::Validation),
        }
    }
}

/// Outcome of one subject process.
#[derive(Debug, Clone)]
pub struct SuiteRun {
    pub verdicts: BTreeMap<String, Verdict>,
    /// Empty for uninstrumented runs.
    pub trace: TraceLog,
    pub trace_path: Option<PathBuf>,
    pub log_path: PathBuf,
    /// Set when the safety timeout had to kill the process.
    pub killed: bool,
}

impl SuiteRun {
    pub fn failing(&self) -> Vec<String> {
        self.verdicts
            .iter()
            .filter(|(_, v)| matches!(v, Verdict::Fail | Verdict::Error))
            .map(|(t, _)| t.clone())
            .collect()
    }

    pub fn is_green(&self) -> bool {
        self.failing().is_empty()
    }
}

/// Launches test runs against a project tree. Safe to share across threads.
#[derive(Debug)]
pub struct Harness {
    command: TestCommand,
    support: SupportFiles,
    timeout: f64,
    scratch: PathBuf,
    next_run: AtomicUsize,
    counter: LaunchCounter,
    /// Whole-process budget for runs of the entire suite.
    pub suite_budget: Duration,
}

impl Harness {
    pub fn new(
        command: TestCommand,
        support: SupportFiles,
        timeout: f64,
        scratch: &Path,
    ) -> Result<Self> {
        if !timeout.is_finite() || timeout <= 0.0 {
            return Err(Error::Config(format!(
                "timeout must be positive, got {timeout}"
            )));
        }
        fs::create_dir_all(scratch).map_err(|e| Error::io(scratch, e))?;
        Ok(Harness {
            command,
            support,
            timeout,
            scratch: scratch.to_path_buf(),
            next_run: AtomicUsize::new(0),
            counter: LaunchCounter::default(),
            suite_budget: Duration::from_secs(600),
        })
    }

    pub fn timeout(&self) -> f64 {
        self.timeout
    }

    pub fn launches(&self) -> LaunchCounts {
        self.counter.snapshot()
    }

    /// Runs `selection` in `root`. With `plan = None` the runtime controller is
    /// not loaded and no trace is collected.
    pub fn run_suite(
        &self,
        root: &Path,
        plan: Option<&InjectionPlan>,
        selection: &Selection,
        kind: LaunchKind,
    ) -> Result<SuiteRun> {
        let n = self.next_run.fetch_add(1, Ordering::SeqCst);
        let dir = self.scratch.join(format!("run-{n:05}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let junit = dir.join("junit.xml");
        let log_path = dir.join("output.log");
        let tests = match selection {
            Selection::All => Vec::new(),
            Selection::Tests(t) => t.clone(),
        };
        let argv = self
            .command
            .render(&self.support.runner, &junit, self.timeout, &tests);
        let command_line = argv.join(" ");

        let log = File::create(&log_path).map_err(|e| Error::io(&log_path, e))?;
        let log_err = log.try_clone().map_err(|e| Error::io(&log_path, e))?;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .current_dir(root)
            .stdin(Stdio::null())
            .stdout(log)
            .stderr(log_err)
            .env("PYTHONDONTWRITEBYTECODE", "1")
            .env("PYTHONPATH", python_path(&self.support.dir))
            .env("SC_CONFIG", &self.support.config);
        for var in ["MODE", "PLAN_SITE", "PLAN_TYPE", "TRACE_PATH"] {
            cmd.env_remove(var);
        }
        let trace_path = match plan {
            Some(plan) => {
                let path = dir.join("trace.log");
                File::create(&path).map_err(|e| Error::io(&path, e))?;
                cmd.env("TRACE_PATH", &path);
                for (k, v) in plan.env() {
                    cmd.env(k, v);
                }
                Some(path)
            }
            None => None,
        };

        self.counter.record(kind);
        let mut child = cmd.spawn().map_err(|e| Error::Launch {
            command: command_line.clone(),
            message: e.to_string(),
        })?;
        let budget = match selection {
            Selection::All => self.suite_budget,
            Selection::Tests(t) => Duration::from_secs_f64(self.timeout * t.len() as f64 + 10.0),
        };
        let io_err = |e| Error::io(&log_path, e);
        let (status, killed) = match child.wait_timeout(budget).map_err(io_err)? {
            Some(status) => (Some(status), false),
            None => {
                let _ = child.kill();
                child.wait().map_err(io_err)?;
                (None, true)
            }
        };

        let reported = if junit.exists() {
            parse_junit(&junit)?
        } else {
            BTreeMap::new()
        };
        let verdicts = match selection {
            Selection::Tests(t) => t
                .iter()
                .map(|id| {
                    (
                        id.clone(),
                        reported.get(id).copied().unwrap_or(Verdict::Error),
                    )
                })
                .collect(),
            Selection::All => {
                if reported.is_empty() && !status.is_some_and(|s| s.success()) {
                    let output = fs::read_to_string(&log_path).unwrap_or_default();
                    let tail: Vec<&str> = output.lines().rev().take(5).collect();
                    return Err(Error::Launch {
                        command: command_line,
                        message: format!(
                            "no test verdicts ({}): {}",
                            status.map_or("killed".to_string(), |s| s.to_string()),
                            tail.into_iter().rev().collect::<Vec<_>>().join(" | ")
                        ),
                    });
                }
                reported
            }
        };

        let trace = match &trace_path {
            Some(p) => TraceLog::read(p)?,
            None => TraceLog::default(),
        };
        if let Some(p) = &trace_path {
            if let Some((t, _)) = verdicts
                .iter()
                .find(|(t, v)| **v == Verdict::Pass && !trace.began(t))
            {
                return Err(Error::TraceCorruption {
                    path: p.clone(),
                    message: format!("passing test `{t}` has no recorded start"),
                });
            }
        }
        Ok(SuiteRun {
            verdicts,
            trace,
            trace_path,
            log_path,
            killed,
        })
    }
}

fn python_path(support: &Path) -> std::ffi::OsString {
    let mut paths = vec![support.to_path_buf()];
    if let Some(existing) = std::env::var_os("PYTHONPATH") {
        paths.extend(std::env::split_paths(&existing));
    }
    std::env::join_paths(paths).unwrap_or_else(|_| support.as_os_str().to_owned())
}

fn attr(e: &BytesStart, name: &str, path: &Path) -> Result<String> {
    let junit_err = |m: String| Error::Junit {
        path: path.to_path_buf(),
        message: m,
    };
    match e
        .try_get_attribute(name)
        .map_err(|x| junit_err(x.to_string()))?
    {
        Some(a) => Ok(a
            .unescape_value()
            .map_err(|x| junit_err(x.to_string()))?
            .into_owned()),
        None => Ok(String::new()),
    }
}

/// Reads a JUnit XML report into `classname::name → verdict`.
pub fn parse_junit(path: &Path) -> Result<BTreeMap<String, Verdict>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_junit_str(&text, path)
}

pub(crate) fn parse_junit_str(text: &str, path: &Path) -> Result<BTreeMap<String, Verdict>> {
    let mut reader = Reader::from_str(text);
    let mut out = BTreeMap::new();
    let mut current: Option<(String, Verdict)> = None;
    loop {
        let event = reader.read_event().map_err(|e| Error::Junit {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"testcase" => {
                let classname = attr(&e, "classname", path)?;
                let name = attr(&e, "name", path)?;
                let id = if classname.is_empty() {
                    name
                } else {
                    format!("{classname}::{name}")
                };
                if let Some((prev, v)) = current.take() {
                    out.insert(prev, v);
                }
                current = Some((id, Verdict::Pass));
            }
            Event::Start(e) | Event::Empty(e) => {
                let outcome = match e.name().as_ref() {
                    b"failure" => Some(Verdict::Fail),
                    b"error" => Some(Verdict::Error),
                    b"skipped" => Some(Verdict::Skip),
                    _ => None,
                };
                if let (Some(v), Some((_, slot))) = (outcome, current.as_mut()) {
                    if *slot == Verdict::Pass || v == Verdict::Error {
                        *slot = v;
                    }
                }
            }
            Event::End(e) if e.name().as_ref() == b"testcase" => {
                if let Some((id, v)) = current.take() {
                    out.insert(id, v);
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if let Some((id, v)) = current {
        out.insert(id, v);
    }
    Ok(out)
}
