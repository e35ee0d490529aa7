// Instruments a copy of a project and prints what changed in each file.

use std::path::{Path, PathBuf};

use shortcircuit::{enumerate_sites, instrument, AppFilter};

pub fn run(project: &Path) -> shortcircuit::Result<()> {
    let inventory = enumerate_sites(project, &AppFilter::default())?;
    let out = tempfile::tempdir().expect("temp dir");
    let copy = instrument(project, &inventory, &out.path().join("instrumented"))?;
    for rel in &copy.instrumented_files {
        let before = std::fs::read_to_string(project.join(rel)).unwrap_or_default();
        let after = std::fs::read_to_string(copy.root.join(rel)).unwrap_or_default();
        println!("== {rel}");
        let diff = similar::TextDiff::from_lines(&before, &after);
        for change in diff.iter_all_changes() {
            if change.tag() == similar::ChangeTag::Insert {
                print!("+ {change}");
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> shortcircuit::Result<()> {
    let project = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/two_catch_clauses")
        });
    run(&project)
}
