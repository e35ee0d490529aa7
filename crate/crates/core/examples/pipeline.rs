// The whole analysis in one call, with the markdown report on stdout.

use std::path::{Path, PathBuf};

use shortcircuit::{render_report, run_pipeline, Format, RunConfig};

pub fn run(project: &Path) -> shortcircuit::Result<()> {
    let out = tempfile::tempdir().expect("temp dir");
    let mut config = RunConfig::new(project, out.path());
    config.formats = vec![Format::Json];
    let report = run_pipeline(&config)?;
    print!("{}", render_report(&report, Format::Markdown)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> shortcircuit::Result<()> {
    let project = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/purely_resilient_spojo")
        });
    run(&project)
}
