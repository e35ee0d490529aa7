// Builds the injection matrix by hand and evaluates both contracts per site.
//
// The standard run gives the covering tests; every (catch clause, covering
// test) pair is then rerun with an exception thrown at the top of the try.

use std::path::{Path, PathBuf};

use shortcircuit::coverage::build_coverage_index;
use shortcircuit::engine::{self, Cell, InjectionOutcome, InjectionRunner};
use shortcircuit::harness::{Harness, LaunchKind, Selection, TestCommand, Verdict};
use shortcircuit::instrument::SupportFiles;
use shortcircuit::{enumerate_sites, instrument, AppFilter, InjectionPlan, TryCatchSite};

struct Injector<'a> {
    harness: &'a Harness,
    root: &'a Path,
}

impl InjectionRunner for Injector<'_> {
    fn run_injected(
        &self,
        site: &TryCatchSite,
        ty: &str,
        test: &str,
    ) -> shortcircuit::Result<InjectionOutcome> {
        let plan = InjectionPlan::inject(site.site_id.clone(), ty);
        let run = self.harness.run_suite(
            self.root,
            Some(&plan),
            &Selection::one(test),
            LaunchKind::Injected,
        )?;
        Ok(InjectionOutcome {
            cell: match run.verdicts.get(test) {
                Some(Verdict::Pass) => Cell::Pass,
                Some(Verdict::Fail) => Cell::Fail,
                _ => Cell::Error,
            },
            uninjectable: run.trace.uninjectable.first().map(|u| u.reason.clone()),
        })
    }
}

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

    let standard = harness.run_suite(
        &copy.root,
        Some(&InjectionPlan::none()),
        &Selection::All,
        LaunchKind::Standard,
    )?;
    let coverage = build_coverage_index(&standard.trace);
    let injector = Injector {
        harness: &harness,
        root: &copy.root,
    };
    let matrix = engine::short_circuit(&inventory, &coverage, &injector, 4)?;
    println!("{}", matrix.to_json()?);

    for (site, v) in inventory
        .sites
        .iter()
        .zip(engine::evaluate(&inventory, &coverage, &matrix))
    {
        println!(
            "{} {:<24} resilience={:<9} independence={:<9} covering={}",
            site.site_id,
            site.function,
            v.pure_resilience,
            v.source_independence,
            coverage.covering_tests(&site.site_id).len()
        );
        for d in &v.diagnostics {
            println!("    note: {d}");
        }
    }
    let l = harness.launches();
    println!("{} standard run, {} injected runs", l.standard, l.injected);
    Ok(())
}

#[allow(dead_code)]
fn main() -> shortcircuit::Result<()> {
    let project = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/source_dependent_cache")
        });
    run(&project)
}
