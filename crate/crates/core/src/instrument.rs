//! Source-to-source instrumentation of application `try` statements.
//!
//! Every enumerated `try` gets, without re-indenting any existing line:
//!
//! * a token + injection hook as the first statement of its body,
//! * a `caught` hook as the first statement of each handler,
//! * a trailing `except BaseException` clause recording uncaught traversals
//!   (omitted when the statement already ends with a bare `except:`),
//! * a `leave` hook in `finally`, reusing an existing `finally` clause.
//!
//! The hooks call into `shortcircuit_rt`, the runtime controller shipped in the
//! support directory alongside the test runner.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;
use crate::python::{Suite, TryStatement};
use crate::site::{self, SiteId, SiteInventory};

pub const RUNTIME_MODULE: &str = "shortcircuit_rt";
pub const RUNTIME_SOURCE: &str = include_str!("../python/shortcircuit_rt.py");
pub const RUNNER_SOURCE: &str = include_str!("../python/shortcircuit_runner.py");
pub const RUNNER_FILE: &str = "shortcircuit_runner.py";
pub const INJECTED_MESSAGE: &str = "short-circuit-injected";

const RT: &str = "__import__(\"shortcircuit_rt\")";

/// Which site, if any, throws at the top of its `try` during a run.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InjectionPlan {
    pub target: Option<InjectionTarget>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionTarget {
    pub site_id: SiteId,
    pub injected_type: String,
}

impl InjectionPlan {
    pub fn none() -> Self {
        InjectionPlan { target: None }
    }

    pub fn inject(site_id: SiteId, injected_type: impl Into<String>) -> Self {
        InjectionPlan {
            target: Some(InjectionTarget {
                site_id,
                injected_type: injected_type.into(),
            }),
        }
    }

    /// Environment for the subject process, as `(name, value)` pairs.
    pub fn env(&self) -> Vec<(&'static str, String)> {
        match &self.target {
            None => vec![("MODE", "standard".to_string())],
            Some(t) => vec![
                ("MODE", "inject".to_string()),
                ("PLAN_SITE", t.site_id.to_string()),
                ("PLAN_TYPE", t.injected_type.clone()),
            ],
        }
    }
}

/// How the runtime builds an instance of a declared exception type. The
/// strategies are attempted in order; the first one producing an instance of
/// the type wins, and a type none of them can build makes the site
/// uninjectable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionRecipe {
    pub exception_type: String,
    pub strategies: Vec<ConstructionStrategy>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstructionStrategy {
    /// `Type("short-circuit-injected")`
    Message,
    /// `Type()`
    NoArg,
    /// A generated subclass with a no-argument constructor and stubs for
    /// abstract methods.
    Synthesized,
}

impl ConstructionStrategy {
    pub fn from_runtime(how: &str) -> Option<Self> {
        match how {
            "message" => Some(ConstructionStrategy::Message),
            "no-arg" => Some(ConstructionStrategy::NoArg),
            "synthesized" => Some(ConstructionStrategy::Synthesized),
            _ => None,
        }
    }
}

pub fn make_injectable(exception_type: &str) -> InjectionRecipe {
    InjectionRecipe {
        exception_type: exception_type.to_string(),
        strategies: vec![
            ConstructionStrategy::Message,
            ConstructionStrategy::NoArg,
            ConstructionStrategy::Synthesized,
        ],
    }
}

/// Runtime and runner files the subject process needs on its `PYTHONPATH`.
#[derive(Debug, Clone)]
pub struct SupportFiles {
    pub dir: PathBuf,
    pub runner: PathBuf,
    pub config: PathBuf,
}

#[derive(Serialize)]
struct RuntimeConfig<'a> {
    app_files: &'a [String],
}

impl SupportFiles {
    pub fn write(dir: &Path, app_files: &[String]) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let dir = dir.canonicalize().map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, text: &str| -> Result<PathBuf> {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            Ok(path)
        };
        write(&format!("{RUNTIME_MODULE}.py"), RUNTIME_SOURCE)?;
        let runner = write(RUNNER_FILE, RUNNER_SOURCE)?;
        let config = write(
            "config.json",
            &serde_json::to_string_pretty(&RuntimeConfig { app_files })?,
        )?;
        Ok(SupportFiles {
            dir,
            runner,
            config,
        })
    }
}

#[derive(Debug, Clone)]
pub struct InstrumentedProject {
    pub root: PathBuf,
    /// Files that received hooks, project-relative.
    pub instrumented_files: Vec<String>,
}

pub(crate) fn is_instrumented(text: &str) -> bool {
    text.contains(RT)
}

struct Edit {
    at: usize,
    end: usize,
    text: String,
    depth: usize,
    seq: u8,
}

fn indent_unit(indent: &str) -> &'static str {
    if indent.contains('\t') {
        "\t"
    } else {
        "    "
    }
}

/// Inserts `stmt` as the first statement of `suite`.
fn prepend(suite: &Suite, colon_end: usize, header_indent: &str, stmt: &str, depth: usize) -> Edit {
    match suite {
        Suite::Block { line_start, indent } => Edit {
            at: *line_start,
            end: *line_start,
            text: format!("{indent}{stmt}\n"),
            depth,
            seq: 0,
        },
        Suite::Inline { start } => {
            let inner = format!("{header_indent}{}", indent_unit(header_indent));
            Edit {
                at: colon_end,
                end: *start,
                text: format!("\n{inner}{stmt}\n{inner}"),
                depth,
                seq: 0,
            }
        }
    }
}

fn statement_edits(stmt: &TryStatement, ids: &[SiteId], n: usize) -> Vec<Edit> {
    let depth = stmt.indent.len();
    let ind = &stmt.indent;
    let unit = indent_unit(ind);
    let token = format!("_sc_t{n}");
    let id_tuple = format!(
        "({},)",
        ids.iter()
            .map(|i| format!("\"{i}\""))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let mut edits = vec![prepend(
        &stmt.body.suite,
        stmt.body.colon_end,
        ind,
        &format!("{token} = {RT}.enter({id_tuple}); {RT}.inject({token})"),
        depth,
    )];
    for (k, h) in stmt.handlers.iter().enumerate() {
        edits.push(prepend(
            &h.clause.suite,
            h.clause.colon_end,
            ind,
            &format!("{RT}.caught({token}, {k})"),
            depth,
        ));
    }
    if let Some(last) = stmt.handlers.last() {
        if last.type_range.is_some() {
            edits.push(Edit {
                at: last.clause.end_offset,
                end: last.clause.end_offset,
                text: format!(
                    "{ind}except BaseException as _sc_e{n}:\n{ind}{unit}{RT}.escape({token}, _sc_e{n})\n{ind}{unit}raise\n"
                ),
                depth,
                seq: 1,
            });
        }
    }
    let leave = format!("{RT}.leave({token})");
    match &stmt.finally_clause {
        Some(f) => edits.push(prepend(&f.suite, f.colon_end, ind, &leave, depth)),
        None => edits.push(Edit {
            at: stmt.end_offset,
            end: stmt.end_offset,
            text: format!("{ind}finally:\n{ind}{unit}{leave}\n"),
            depth,
            seq: 2,
        }),
    }
    edits
}

/// Rewrites one module. `text` must end with a newline.
pub(crate) fn instrument_source(rel: &str, text: &str, stmts: &[TryStatement]) -> String {
    let mut edits = Vec::new();
    for (n, stmt) in stmts.iter().enumerate() {
        if stmt.handlers.is_empty() {
            continue;
        }
        let ids: Vec<SiteId> = site::sites_of(rel, stmt)
            .into_iter()
            .map(|s| s.site_id)
            .collect();
        edits.extend(statement_edits(stmt, &ids, n));
    }
    edits.sort_by(|a, b| {
        a.at.cmp(&b.at)
            .then(b.depth.cmp(&a.depth))
            .then(a.seq.cmp(&b.seq))
    });
    let mut out = String::with_capacity(text.len() + edits.len() * 64);
    let mut cursor = 0;
    for e in edits {
        out.push_str(&text[cursor..e.at]);
        out.push_str(&e.text);
        cursor = e.end;
    }
    out.push_str(&text[cursor..]);
    out
}

/// Copies `project_root` to `output_root` and instruments every application
/// file that holds an inventoried site. The original tree is never written.
pub fn instrument(
    project_root: &Path,
    inventory: &SiteInventory,
    output_root: &Path,
) -> Result<InstrumentedProject> {
    let actual = site::fingerprint(project_root)?;
    if actual != inventory.project_fingerprint {
        return Err(Error::StaleInventory {
            expected: inventory.project_fingerprint.clone(),
            actual,
        });
    }
    let mut files: Vec<&str> = inventory.sites.iter().map(|s| s.file.as_str()).collect();
    files.dedup();

    let mut rewritten = Vec::new();
    for rel in &files {
        let mut text = site::read_source(&project_root.join(rel))?;
        if is_instrumented(&text) {
            return Err(Error::AlreadyInstrumented(project_root.join(rel)));
        }
        if !text.ends_with('\n') {
            text.push('\n');
        }
        let stmts = crate::python::try_statements(&text).map_err(|e| Error::Parse {
            file: PathBuf::from(rel),
            line: e.line,
            col: e.col,
            message: e.message,
        })?;
        rewritten.push((rel.to_string(), instrument_source(rel, &text, &stmts)));
    }

    fsutil::copy_tree(project_root, output_root)?;
    for (rel, text) in &rewritten {
        let path = output_root.join(rel);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(InstrumentedProject {
        root: output_root.to_path_buf(),
        instrumented_files: rewritten.into_iter().map(|(rel, _)| rel).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::python::try_statements;

    fn transform(src: &str) -> String {
        let stmts = try_statements(src).unwrap();
        instrument_source("m.py", src, &stmts)
    }

    #[test]
    fn block_statement_gets_all_hooks() {
        let src = "def f():\n    try:\n        a()\n    except ValueError as e:\n        b()\n    return 1\n";
        let out = transform(src);
        let lines: Vec<&str> = out.lines().collect();
        assert!(lines[2].starts_with("        _sc_t0 = __import__(\"shortcircuit_rt\").enter(("));
        assert!(lines[2].ends_with(".inject(_sc_t0)"));
        assert_eq!(lines[3], "        a()");
        assert_eq!(lines[4], "    except ValueError as e:");
        assert_eq!(
            lines[5],
            "        __import__(\"shortcircuit_rt\").caught(_sc_t0, 0)"
        );
        assert_eq!(lines[7], "    except BaseException as _sc_e0:");
        assert_eq!(lines[10], "    finally:");
        assert_eq!(lines[12], "    return 1");
        assert!(try_statements(&out).is_ok());
    }

    #[test]
    fn bare_except_gets_no_escape_clause_and_finally_is_reused() {
        let src = "try:\n    a()\nexcept:\n    b()\nfinally:\n    c()\n";
        let out = transform(src);
        assert!(!out.contains("except BaseException"));
        assert!(
            out.contains("finally:\n    __import__(\"shortcircuit_rt\").leave(_sc_t0)\n    c()\n")
        );
        assert_eq!(out.matches("finally:").count(), 1);
    }

    #[test]
    fn inline_suites_are_split() {
        let src = "try: x = 1\nexcept E: pass\nelse: y = 2\n";
        let out = transform(src);
        assert!(out.starts_with("try:\n    _sc_t0 = "));
        assert!(out.contains("\n    x = 1\nexcept E:\n    __import__(\"shortcircuit_rt\").caught(_sc_t0, 0)\n    pass\nexcept BaseException"));
        let escape = out.find("except BaseException").unwrap();
        assert!(escape < out.find("else:").unwrap());
        let reparsed = try_statements(&out).unwrap();
        assert!(reparsed[0].else_clause.is_some());
        assert_eq!(reparsed[0].handlers.len(), 2);
    }

    #[test]
    fn nested_statements_close_inner_first() {
        let src = "\
try:
    try:
        a()
    except KeyError:
        b()
except ValueError:
    c()
";
        let out = transform(src);
        let stmts = try_statements(&out).unwrap();
        assert_eq!(stmts.len(), 2);
        assert!(stmts[0].finally_clause.is_some() && stmts[1].finally_clause.is_some());
        let inner_finally = out
            .find("    finally:\n        __import__(\"shortcircuit_rt\").leave(_sc_t1)")
            .unwrap();
        assert!(inner_finally < out.find("except ValueError").unwrap());
    }

    #[test]
    fn multi_line_strings_are_untouched() {
        let src = "try:\n    s = '''\nexcept X:\n  '''\nexcept Y:\n    pass\n";
        let out = transform(src);
        assert!(out.contains("    s = '''\nexcept X:\n  '''\n"));
        assert_eq!(out.matches(".caught(").count(), 1);
    }

    #[test]
    fn plan_environment() {
        assert_eq!(
            InjectionPlan::none().env(),
            vec![("MODE", "standard".to_string())]
        );
        let env = InjectionPlan::inject(SiteId::new("abc"), "KeyError").env();
        assert!(env.contains(&("PLAN_SITE", "abc".to_string())));
        assert!(env.contains(&("PLAN_TYPE", "KeyError".to_string())));
        assert!(env.contains(&("MODE", "inject".to_string())));
    }
}
