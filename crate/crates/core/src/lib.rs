//! Exception contract analysis for Python projects.
//!
//! Enumerates try-catch sites, instruments them, runs the test suite once in
//! standard mode and once per (site, covering test) with an exception injected
//! at the top of the `try`, then classifies each site's resilience and
//! independence contracts. Sites whose handlers can safely catch `Exception`
//! are reported as stretchable, with patches.

pub mod color;
pub mod coverage;
pub mod engine;
pub mod error;
mod fsutil;
pub mod harness;
pub mod instrument;
pub mod pipeline;
mod python;
pub mod report;
pub mod site;
pub mod stretch;
pub mod trace;

pub use error::{Error, Result};
pub use instrument::{instrument, InjectionPlan};
pub use pipeline::{run_pipeline, RunConfig};
pub use report::{render_report, Format, Report};
pub use site::{enumerate_sites, site_lookup, AppFilter, SiteId, SiteInventory, TryCatchSite};
