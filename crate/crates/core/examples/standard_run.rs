// Runs the instrumented suite once and classifies every passing test as
// pink, white or blue.

use std::path::{Path, PathBuf};

use shortcircuit::color::{color_tests, compute_stats};
use shortcircuit::harness::{Harness, LaunchKind, Selection, TestCommand};
use shortcircuit::instrument::SupportFiles;
use shortcircuit::{enumerate_sites, instrument, AppFilter, InjectionPlan};

pub fn run(project: &Path) -> shortcircuit::Result<()> {
    let project = project.canonicalize().expect("project exists");
    let filter = AppFilter::default();
    let inventory = enumerate_sites(&project, &filter)?;
    let work = tempfile::tempdir().expect("temp dir");
    let copy = instrument(&project, &inventory, &work.path().join("instrumented"))?;
    let app: Vec<String> = shortcircuit::site::python_sources(&copy.root)?
        .into_iter()
        .filter(|f| filter.is_app(f))
        .map(|f| copy.root.join(f).to_string_lossy().into_owned())
        .collect();
    let support = SupportFiles::write(&work.path().join("support"), &app)?;
    let harness = Harness::new(
        TestCommand::default(),
        support,
        10.0,
        &work.path().join("runs"),
    )?;

    let run = harness.run_suite(
        &copy.root,
        Some(&InjectionPlan::none()),
        &Selection::All,
        LaunchKind::Standard,
    )?;
    let records = color_tests(&run.verdicts, &run.trace);
    for r in &records {
        println!(
            "{:<10} bubbled={} internal={}  {}",
            format!("{:?}", r.color).to_lowercase(),
            r.bubbled_count,
            r.internal_thrown_count,
            r.test_id
        );
    }
    let s = compute_stats(&records);
    println!(
        "{} tests: {} pink, {} white ({}%), {} blue ({}%)",
        s.total_tests, s.pink_count, s.white_count, s.white_percent, s.blue_count, s.blue_percent
    );
    Ok(())
}

#[allow(dead_code)]
fn main() -> shortcircuit::Result<()> {
    let project = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/taxonomy"));
    run(&project)
}
