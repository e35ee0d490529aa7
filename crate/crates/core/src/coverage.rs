use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::site::SiteId;
use crate::trace::{TraceLog, UsageKind};

/// Which tests traversed which site in the standard run, with the kind of
/// every traversal in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageIndex {
    usages: BTreeMap<SiteId, BTreeMap<String, Vec<UsageKind>>>,
}

pub fn build_coverage_index(trace: &TraceLog) -> CoverageIndex {
    let mut index = CoverageIndex::default();
    for e in &trace.events {
        index.record(e.site_id.clone(), &e.test_id, e.kind);
    }
    index
}

impl CoverageIndex {
    pub fn record(&mut self, site: SiteId, test: &str, kind: UsageKind) {
        self.usages
            .entry(site)
            .or_default()
            .entry(test.to_string())
            .or_default()
            .push(kind);
    }

    /// Executed sites, sorted by id.
    pub fn sites(&self) -> impl Iterator<Item = &SiteId> {
        self.usages.keys()
    }

    pub fn is_executed(&self, site: &SiteId) -> bool {
        self.usages.contains_key(site)
    }

    /// Tests covering `site`, sorted. Empty for an unexecuted site.
    pub fn covering_tests(&self, site: &SiteId) -> Vec<&str> {
        self.usages
            .get(site)
            .map(|m| m.keys().map(String::as_str).collect())
            .unwrap_or_default()
    }

    pub fn usages(&self, site: &SiteId, test: &str) -> &[UsageKind] {
        self.usages
            .get(site)
            .and_then(|m| m.get(test))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn entries(&self, site: &SiteId) -> impl Iterator<Item = (&str, &[UsageKind])> {
        self.usages
            .get(site)
            .into_iter()
            .flat_map(|m| m.iter().map(|(t, u)| (t.as_str(), u.as_slice())))
    }

    /// A copy without the given tests; sites left with no test disappear.
    pub fn without_tests(&self, excluded: &BTreeSet<String>) -> CoverageIndex {
        let usages = self
            .usages
            .iter()
            .filter_map(|(site, tests)| {
                let kept: BTreeMap<_, _> = tests
                    .iter()
                    .filter(|(t, _)| !excluded.contains(*t))
                    .map(|(t, u)| (t.clone(), u.clone()))
                    .collect();
                (!kept.is_empty()).then(|| (site.clone(), kept))
            })
            .collect();
        CoverageIndex { usages }
    }

    /// Number of (site, test) pairs.
    pub fn pair_count(&self) -> usize {
        self.usages.values().map(BTreeMap::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::UsageEvent;

    #[test]
    fn index_groups_usages_per_site_and_test() {
        let ev = |site: &str, test: &str, kind| UsageEvent {
            site_id: SiteId::new(site),
            test_id: test.into(),
            kind,
            exception_type: (kind != UsageKind::Pink).then(|| "E".into()),
            sequence_no: 0,
            xid: None,
            injected: false,
        };
        let trace = TraceLog {
            events: vec![
                ev("a", "t1", UsageKind::Pink),
                ev("a", "t1", UsageKind::White),
                ev("a", "t5", UsageKind::Pink),
                ev("b", "t2", UsageKind::Blue),
            ],
            ..Default::default()
        };
        let idx = build_coverage_index(&trace);
        let a = SiteId::new("a");
        assert_eq!(idx.covering_tests(&a), vec!["t1", "t5"]);
        assert_eq!(idx.usages(&a, "t1"), &[UsageKind::Pink, UsageKind::White]);
        assert!(!idx.is_executed(&SiteId::new("never")));
        assert!(idx.covering_tests(&SiteId::new("never")).is_empty());
        assert_eq!(idx.pair_count(), 3);

        let pruned = idx.without_tests(&["t2".to_string(), "t5".to_string()].into());
        assert_eq!(pruned.sites().count(), 1);
        assert_eq!(pruned.covering_tests(&a), vec!["t1"]);
    }
}
