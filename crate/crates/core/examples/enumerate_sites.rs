// Lists the try-catch sites of a project, one row per catch clause.
//
// ```text
// cargo run --example enumerate_sites -- path/to/project
// ```

use std::path::{Path, PathBuf};

use shortcircuit::{enumerate_sites, AppFilter};

pub fn run(project: &Path) -> shortcircuit::Result<()> {
    let inventory = enumerate_sites(project, &AppFilter::default())?;
    println!("fingerprint {}", &inventory.project_fingerprint[..16]);
    for site in &inventory.sites {
        let generic = if site.is_generic() { " (generic)" } else { "" };
        println!(
            "{}  {:<28} {:<32} except {}{generic}",
            site.site_id,
            site.location(),
            site.function,
            site.caught_types.join(", ")
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> shortcircuit::Result<()> {
    let project = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/unknown_coverage"));
    run(&project)
}
