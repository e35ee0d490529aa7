// Widens source-independent catch clauses to `Exception` and keeps the ones
// the test suite accepts, alone and together.

use std::path::{Path, PathBuf};

use shortcircuit::{run_pipeline, RunConfig};

pub fn run(project: &Path) -> shortcircuit::Result<()> {
    let out = tempfile::tempdir().expect("temp dir");
    let mut config = RunConfig::new(project, out.path());
    config.stretch = true;
    config.jobs = 4;
    let report = run_pipeline(&config)?;
    let Some(section) = &report.stretch else {
        return Ok(());
    };
    for r in &section.results {
        println!(
            "{} {:<18} {:<24} {} {}",
            r.candidate.site_id,
            r.candidate.case.as_str(),
            r.decision.as_str(),
            r.reason.as_deref().unwrap_or(""),
            r.failing_tests.join(", ")
        );
    }
    let combined =
        std::fs::read_to_string(out.path().join("patches/combined.diff")).unwrap_or_default();
    print!("{combined}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> shortcircuit::Result<()> {
    let project = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/interplay_rollback")
        });
    run(&project)
}
