//! Raw-sample contamination auditing: how much of the test set rests on
//! samples the training set has already seen.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{raw_overlap, FoldAssignment, LabeledInstance, Span, Window};

/// Per-source index of merged train intervals, for exact overlap queries.
struct IntervalIndex<'a> {
    by_source: HashMap<&'a str, Vec<Span>>,
}

impl<'a> IntervalIndex<'a> {
    fn build(train: impl Iterator<Item = &'a LabeledInstance>) -> Self {
        let mut raw: HashMap<&str, Vec<Span>> = HashMap::new();
        for inst in train {
            raw.entry(inst.source_id.as_str()).or_default().push(inst.span);
        }
        let by_source = raw
            .into_iter()
            .map(|(src, mut spans)| {
                spans.sort_by_key(|s| s.start);
                let mut merged: Vec<Span> = Vec::new();
                for s in spans {
                    match merged.last_mut() {
                        Some(last) if s.start < last.end => last.end = last.end.max(s.end),
                        _ => merged.push(s),
                    }
                }
                (src, merged)
            })
            .collect();
        IntervalIndex { by_source }
    }

    fn intersects(&self, source: &str, span: &Span) -> bool {
        let Some(merged) = self.by_source.get(source) else {
            return false;
        };
        // first interval with end > span.start
        let i = merged.partition_point(|s| s.end <= span.start);
        merged.get(i).map_or(false, |s| s.start < span.end)
    }
}

/// Fraction of test instances whose raw span shares at least one index, on
/// the same source, with some train instance.
pub fn leakage_fraction(train: &[&LabeledInstance], test: &[&LabeledInstance]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invariant("leakage_fraction over an empty test set"));
    }
    let index = IntervalIndex::build(train.iter().copied());
    let leaked = test
        .iter()
        .filter(|t| index.intersects(&t.source_id, &t.span))
        .count();
    Ok(leaked as f64 / test.len() as f64)
}

/// Fraction of test instances sharing at least half their raw samples with
/// some single train instance. Covers the near-duplicate case for
/// non-overlapping windows over slow-changing activities.
pub fn near_duplicate_fraction(
    train: &[&LabeledInstance],
    test: &[&LabeledInstance],
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invariant("near_duplicate_fraction over an empty test set"));
    }
    let hits = test
        .iter()
        .filter(|t| {
            let need = (t.span.len() + 1) / 2;
            train
                .iter()
                .any(|tr| tr.source_id == t.source_id && tr.span.overlap(&t.span) >= need)
        })
        .count();
    Ok(hits as f64 / test.len() as f64)
}

/// Fraction of test instances whose nearest train span on the same source is
/// within `k` raw indices (overlapping spans count as distance 0).
pub fn adjacency_fraction(
    train: &[&LabeledInstance],
    test: &[&LabeledInstance],
    k: usize,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::invariant("adjacency_fraction over an empty test set"));
    }
    let hits = test
        .iter()
        .filter(|t| {
            train.iter().any(|tr| {
                if tr.source_id != t.source_id {
                    return false;
                }
                let gap = if tr.span.overlap(&t.span) > 0 {
                    0
                } else if tr.span.end <= t.span.start {
                    t.span.start - tr.span.end
                } else {
                    tr.span.start - t.span.end
                };
                gap <= k
            })
        })
        .count();
    Ok(hits as f64 / test.len() as f64)
}

/// Histogram of raw overlap between consecutive windows of one segmentation
/// run, keyed by overlap size. Fixed size/step segmentation shows a single
/// spike at size - step.
pub fn overlap_histogram(windows: &[Window]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for pair in windows.windows(2) {
        if pair[0].source_id != pair[1].source_id {
            continue;
        }
        *hist.entry(raw_overlap(&pair[0], &pair[1])).or_default() += 1;
    }
    hist
}

/// A group key present in more than one partition.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct GroupViolation {
    pub group_key: String,
    pub partitions: Vec<String>,
}

/// Lists every group spanning multiple partitions; empty means group
/// integrity holds.
pub fn group_integrity(
    assignment: &FoldAssignment,
    instances: &[LabeledInstance],
) -> Vec<GroupViolation> {
    let mut seen: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for part in &assignment.partitions {
        for &i in &part.indices {
            let parts = seen.entry(instances[i].group_key.as_str()).or_default();
            if parts.last() != Some(&part.name.as_str()) {
                parts.push(&part.name);
            }
        }
    }
    seen.into_iter()
        .filter(|(_, parts)| parts.len() > 1)
        .map(|(group, parts)| GroupViolation {
            group_key: group.to_string(),
            partitions: parts.into_iter().map(|p| p.to_string()).collect(),
        })
        .collect()
}

/// Serializable audit summary: {leakage_fraction, violations, histogram,
/// parameters}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub leakage_fraction: f64,
    pub near_duplicate_fraction: f64,
    pub adjacency_fraction: f64,
    /// Raw-index distance used for the adjacency metric.
    pub adjacency_k: usize,
    pub violations: Vec<GroupViolation>,
    pub overlap_histogram: BTreeMap<usize, usize>,
    pub train_size: usize,
    pub test_size: usize,
}

/// Runs every audit metric against one train/test assignment. `adjacency_k`
/// defaults to the window size when `None`.
pub fn audit_assignment(
    assignment: &FoldAssignment,
    instances: &[LabeledInstance],
    windows: &[Window],
    train_name: &str,
    test_name: &str,
    adjacency_k: Option<usize>,
) -> Result<AuditReport> {
    let collect = |name: &str| -> Result<Vec<&LabeledInstance>> {
        Ok(assignment
            .partition(name)
            .ok_or_else(|| Error::invariant(format!("no partition named '{name}'")))?
            .indices
            .iter()
            .map(|&i| &instances[i])
            .collect())
    };
    let train = collect(train_name)?;
    let test = collect(test_name)?;
    let k = adjacency_k
        .or_else(|| test.first().map(|t| t.span.len()))
        .unwrap_or(0);
    Ok(AuditReport {
        leakage_fraction: leakage_fraction(&train, &test)?,
        near_duplicate_fraction: near_duplicate_fraction(&train, &test)?,
        adjacency_fraction: adjacency_fraction(&train, &test, k)?,
        adjacency_k: k,
        violations: group_integrity(assignment, instances),
        overlap_histogram: overlap_histogram(windows),
        train_size: train.len(),
        test_size: test.len(),
    })
}

#[cfg(test)]
pub mod oracle {
    //! Brute-force O(N^2) reference used to cross-check the interval index.

    use super::*;

    pub fn leakage_fraction_bruteforce(
        train: &[&LabeledInstance],
        test: &[&LabeledInstance],
    ) -> f64 {
        let leaked = test
            .iter()
            .filter(|t| {
                train
                    .iter()
                    .any(|tr| tr.source_id == t.source_id && tr.span.overlap(&t.span) > 0)
            })
            .count();
        leaked as f64 / test.len() as f64
    }
}
