//! Reading the line-delimited trace written by the runtime controller.

use std::collections::HashSet;
use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::site::{SiteId, SiteInventory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UsageKind {
    /// The try completed without an exception.
    Pink,
    /// An exception was caught by this site's clause.
    White,
    /// An exception traversed the try without being caught by this clause.
    Blue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub site_id: SiteId,
    pub test_id: String,
    pub kind: UsageKind,
    pub exception_type: Option<String>,
    pub sequence_no: u64,
    /// Identity of the exception object within the run.
    pub xid: Option<u64>,
    pub injected: bool,
}

/// An exception that propagated out of application code into test code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BubbleRecord {
    pub test_id: String,
    pub exception_type: String,
    pub sequence_no: u64,
    pub xid: u64,
    pub injected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub site_id: SiteId,
    pub test_id: String,
    pub exception_type: String,
    pub strategy: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UninjectableRecord {
    pub site_id: SiteId,
    pub test_id: String,
    pub exception_type: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLog {
    pub events: Vec<UsageEvent>,
    pub bubbles: Vec<BubbleRecord>,
    pub injections: Vec<InjectionRecord>,
    pub uninjectable: Vec<UninjectableRecord>,
    /// Tests whose start was recorded, in execution order.
    pub tests: Vec<String>,
    /// Usages recorded outside any test, e.g. at import time.
    pub unattributed: usize,
}

#[derive(Deserialize)]
#[serde(tag = "ev", rename_all = "lowercase")]
enum Record {
    Usage {
        site: SiteId,
        test: Option<String>,
        kind: UsageKind,
        ex: Option<String>,
        seq: u64,
        xid: Option<u64>,
        #[serde(default)]
        inj: bool,
    },
    Bubble {
        test: String,
        ex: String,
        seq: u64,
        xid: u64,
        #[serde(default)]
        inj: bool,
    },
    Begin {
        test: String,
        seq: u64,
    },
    End {
        test: String,
        seq: u64,
    },
    Inject {
        site: SiteId,
        test: String,
        ex: String,
        how: String,
        seq: u64,
    },
    Uninjectable {
        site: SiteId,
        test: String,
        ex: String,
        reason: String,
        seq: u64,
    },
}

impl Record {
    fn seq(&self) -> u64 {
        match self {
            Record::Usage { seq, .. }
            | Record::Bubble { seq, .. }
            | Record::Begin { seq, .. }
            | Record::End { seq, .. }
            | Record::Inject { seq, .. }
            | Record::Uninjectable { seq, .. } => *seq,
        }
    }
}

impl TraceLog {
    /// Reads a trace file. A missing file is an empty trace.
    pub fn read(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text, path),
            Err(e) if e.kind() == ErrorKind::NotFound => Ok(TraceLog::default()),
            Err(e) => Err(Error::io(path, e)),
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let corrupt = |line: usize, message: String| Error::TraceCorruption {
            path: path.to_path_buf(),
            message: format!("line {line}: {message}"),
        };
        let mut log = TraceLog::default();
        let mut last_seq = 0;
        let mut open: Option<String> = None;
        let in_test = |open: &Option<String>, test: &str, line: usize| {
            if open.as_deref() == Some(test) {
                Ok(())
            } else {
                Err(corrupt(
                    line,
                    format!("record for `{test}` outside its test boundaries"),
                ))
            }
        };
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let record: Record =
                serde_json::from_str(raw).map_err(|e| corrupt(n, e.to_string()))?;
            if record.seq() <= last_seq {
                return Err(corrupt(
                    n,
                    format!("sequence number {} not increasing", record.seq()),
                ));
            }
            last_seq = record.seq();
            match record {
                Record::Begin { test, .. } => {
                    if let Some(prev) = &open {
                        return Err(corrupt(n, format!("`{test}` begins before `{prev}` ended")));
                    }
                    log.tests.push(test.clone());
                    open = Some(test);
                }
                Record::End { test, .. } => {
                    in_test(&open, &test, n)?;
                    open = None;
                }
                Record::Usage { test: None, .. } => log.unattributed += 1,
                Record::Usage {
                    site,
                    test: Some(test),
                    kind,
                    ex,
                    seq,
                    xid,
                    inj,
                } => {
                    in_test(&open, &test, n)?;
                    if (kind == UsageKind::Pink) != ex.is_none() {
                        return Err(corrupt(
                            n,
                            "exception type must be present exactly for non-pink usages".into(),
                        ));
                    }
                    log.events.push(UsageEvent {
                        site_id: site,
                        test_id: test,
                        kind,
                        exception_type: ex,
                        sequence_no: seq,
                        xid,
                        injected: inj,
                    });
                }
                Record::Bubble {
                    test,
                    ex,
                    seq,
                    xid,
                    inj,
                } => {
                    in_test(&open, &test, n)?;
                    log.bubbles.push(BubbleRecord {
                        test_id: test,
                        exception_type: ex,
                        sequence_no: seq,
                        xid,
                        injected: inj,
                    });
                }
                Record::Inject {
                    site,
                    test,
                    ex,
                    how,
                    ..
                } => {
                    in_test(&open, &test, n)?;
                    log.injections.push(InjectionRecord {
                        site_id: site,
                        test_id: test,
                        exception_type: ex,
                        strategy: how,
                    });
                }
                Record::Uninjectable {
                    site,
                    test,
                    ex,
                    reason,
                    ..
                } => {
                    in_test(&open, &test, n)?;
                    log.uninjectable.push(UninjectableRecord {
                        site_id: site,
                        test_id: test,
                        exception_type: ex,
                        reason,
                    });
                }
            }
        }
        Ok(log)
    }

    /// Checks that every usage names a site of `inventory`.
    pub fn validate_sites(&self, inventory: &SiteInventory) -> Result<()> {
        let known: HashSet<&SiteId> = inventory.sites.iter().map(|s| &s.site_id).collect();
        match self.events.iter().find(|e| !known.contains(&e.site_id)) {
            Some(e) => Err(Error::TraceCorruption {
                path: Default::default(),
                message: format!("usage of unknown site {}", e.site_id),
            }),
            None => Ok(()),
        }
    }

    pub fn began(&self, test_id: &str) -> bool {
        self.tests.iter().any(|t| t == test_id)
    }

    pub fn events_of<'a>(&'a self, test_id: &'a str) -> impl Iterator<Item = &'a UsageEvent> + 'a {
        self.events.iter().filter(move |e| e.test_id == test_id)
    }

    pub fn bubbles_of<'a>(
        &'a self,
        test_id: &'a str,
    ) -> impl Iterator<Item = &'a BubbleRecord> + 'a {
        self.bubbles.iter().filter(move |b| b.test_id == test_id)
    }
}
