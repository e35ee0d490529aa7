use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use shortcircuit::pipeline::FailOn;
use shortcircuit::{run_pipeline, Format, RunConfig};

#[derive(Parser)]
#[command(
    version,
    about = "Verify exception contracts of a Python project by short-circuit testing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full analysis on a project.
    Analyze {
        project_root: PathBuf,
        /// Test command template; see the README for placeholders.
        #[arg(long = "tests", default_value = shortcircuit::harness::DEFAULT_TEST_COMMAND)]
        tests: String,
        /// Glob selecting application sources (repeatable).
        #[arg(long = "app-filter", default_value = "**/*.py")]
        app_filter: Vec<String>,
        /// Glob selecting test code, excluded from analysis (repeatable).
        #[arg(long = "test-filter")]
        test_filter: Vec<String>,
        /// Per-test timeout in seconds.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Try widening source-independent handlers to `Exception`.
        #[arg(long)]
        stretch: bool,
        /// Comma-separated report formats: json, md.
        #[arg(long, default_value = "json,md", value_delimiter = ',')]
        format: Vec<Format>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Exit with status 2 when a verdict of this kind exists.
        #[arg(long = "fail-on")]
        fail_on: Option<FailOn>,
    },
}

fn main() -> ExitCode {
    let Command::Analyze {
        project_root,
        tests,
        app_filter,
        test_filter,
        timeout,
        jobs,
        stretch,
        format,
        out,
        fail_on,
    } = Cli::parse().command;
    let mut config = RunConfig::new(project_root, out);
    config.test_command = tests;
    config.app_patterns = app_filter;
    if !test_filter.is_empty() {
        config.test_patterns = test_filter;
    }
    config.timeout = timeout;
    config.jobs = jobs;
    config.stretch = stretch;
    config.formats = format;

    match run_pipeline(&config) {
        Ok(report) => {
            let m = &report.summary;
            println!(
                "{} sites, {} executed: {} purely resilient, {} source-independent, {} source-dependent",
                m.sites, m.executed, m.purely_resilient, m.source_independent, m.source_dependent
            );
            println!("reports written to {}", config.out_dir.display());
            match fail_on {
                Some(f) if f.triggered(&report) => ExitCode::from(2),
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
