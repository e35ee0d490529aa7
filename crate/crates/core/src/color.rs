//! Pink/blue/white classification of passing tests.
//!
//! A passing test is blue when an exception from application code reaches test
//! code, white when exceptions are thrown but all are caught inside the
//! application, and pink when no exception is involved at all.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::harness::Verdict;
use crate::trace::{TraceLog, UsageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    Pink,
    Blue,
    White,
    Uncolored,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test_id: String,
    pub verdict: Verdict,
    pub color: Color,
    /// Distinct exceptions that reached test code.
    pub bubbled_count: usize,
    /// Distinct exceptions thrown in application code that never reached
    /// test code.
    pub internal_thrown_count: usize,
}

pub fn color_tests(verdicts: &BTreeMap<String, Verdict>, trace: &TraceLog) -> Vec<TestRecord> {
    verdicts
        .iter()
        .map(|(test, &verdict)| {
            let bubbled: BTreeSet<u64> = trace.bubbles_of(test).map(|b| b.xid).collect();
            let internal: BTreeSet<u64> = trace
                .events_of(test)
                .filter(|e| e.kind != UsageKind::Pink)
                .filter_map(|e| e.xid)
                .filter(|x| !bubbled.contains(x))
                .collect();
            let color = if verdict != Verdict::Pass {
                Color::Uncolored
            } else if !bubbled.is_empty() {
                Color::Blue
            } else if !internal.is_empty() {
                Color::White
            } else {
                Color::Pink
            };
            TestRecord {
                test_id: test.clone(),
                verdict,
                color,
                bubbled_count: bubbled.len(),
                internal_thrown_count: internal.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteStats {
    /// Tests with a verdict other than skip.
    pub total_tests: usize,
    pub passing: usize,
    pub blue_count: usize,
    pub white_count: usize,
    pub pink_count: usize,
    /// Exceptions reaching test code, summed over blue tests.
    pub expected_exceptions_total: usize,
    /// Exceptions thrown and caught inside the application, summed over
    /// passing tests.
    pub internal_exceptions_total: usize,
    pub blue_percent: u64,
    pub white_percent: u64,
}

/// `part / total` as a whole percentage, rounding halves up. Zero when
/// `total` is zero.
pub fn whole_percent(part: usize, total: usize) -> u64 {
    if total == 0 {
        return 0;
    }
    let (part, total) = (part as u64, total as u64);
    (part * 100 + total / 2) / total
}

pub fn compute_stats(records: &[TestRecord]) -> SuiteStats {
    let mut s = SuiteStats::default();
    for r in records {
        if r.verdict == Verdict::Skip {
            continue;
        }
        s.total_tests += 1;
        match r.color {
            Color::Blue => {
                s.blue_count += 1;
                s.expected_exceptions_total += r.bubbled_count;
            }
            Color::White => s.white_count += 1,
            Color::Pink => s.pink_count += 1,
            Color::Uncolored => {}
        }
        if r.verdict == Verdict::Pass {
            s.passing += 1;
            s.internal_exceptions_total += r.internal_thrown_count;
        }
    }
    s.blue_percent = whole_percent(s.blue_count, s.total_tests);
    s.white_percent = whole_percent(s.white_count, s.total_tests);
    s
}
