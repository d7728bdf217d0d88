//! Shared domain types: sensor events, sample rows, windows, instances and
//! fold assignments. Everything here is immutable after construction and safe
//! to share read-only across worker threads.

use std::collections::HashMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense integer id of an activity class. Ids are assigned by a [`ClassTable`]
/// so confusion-matrix axes stay stable across runs.
pub type ClassId = usize;

/// Interning table mapping activity names to dense class ids.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClassTable {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, ClassId>,
}

impl ClassTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `name`, interning it if unseen.
    pub fn intern(&mut self, name: &str) -> ClassId {
        if self.index.is_empty() && !self.names.is_empty() {
            self.rebuild_index();
        }
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<ClassId> {
        if self.index.is_empty() && !self.names.is_empty() {
            return self.names.iter().position(|n| n == name);
        }
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ClassId) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorKind {
    Motion,
    DoorContact,
    Temperature,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SensorValue {
    /// On/off for motion and door-contact sensors.
    Binary(bool),
    /// Degrees Celsius for temperature sensors.
    Reading(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Marker {
    Begin,
    End,
}

/// Activity annotation attached to an event in the raw log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub activity: String,
    pub marker: Marker,
}

/// One timestamped reading from an ambient sensor. `label` is `None` until
/// annotation spans are resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorEvent {
    pub timestamp: NaiveDateTime,
    pub sensor_id: String,
    pub kind: SensorKind,
    pub value: SensorValue,
    pub annotation: Option<Annotation>,
    pub label: Option<ClassId>,
}

/// One fixed-rate multichannel reading from a body-sensor stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    /// 0-based position within its (post gap-splitting) stream segment.
    pub index: usize,
    pub channels: Vec<f64>,
    pub label: ClassId,
    pub subject_id: String,
}

/// Half-open interval of raw stream indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start >= self.end
    }

    /// Size of the index-set intersection with `other`.
    pub fn overlap(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }
}

/// A contiguous segment of raw indices over one source stream, with its
/// derived label and group key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub source_id: String,
    pub span: Span,
    pub label: ClassId,
    /// Collection date or subject id, depending on the grouping rule.
    pub group_key: String,
}

/// Shared raw-sample count between two windows. Windows over different
/// sources never overlap.
pub fn raw_overlap(a: &Window, b: &Window) -> usize {
    if a.source_id != b.source_id {
        return 0;
    }
    a.span.overlap(&b.span)
}

/// Feature vector plus everything splitters and the auditor need to know
/// about where it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub features: Vec<f64>,
    pub label: ClassId,
    pub group_key: String,
    pub span: Span,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitScheme {
    RandomShuffle,
    StratifiedKfold,
    GroupKfold,
    StratifiedGroupKfold,
    Loso,
    ExplicitHoldout,
}

impl SplitScheme {
    pub fn is_group_based(&self) -> bool {
        matches!(
            self,
            SplitScheme::GroupKfold
                | SplitScheme::StratifiedGroupKfold
                | SplitScheme::Loso
                | SplitScheme::ExplicitHoldout
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            SplitScheme::RandomShuffle => "random-shuffle",
            SplitScheme::StratifiedKfold => "stratified-kfold",
            SplitScheme::GroupKfold => "group-kfold",
            SplitScheme::StratifiedGroupKfold => "stratified-group-kfold",
            SplitScheme::Loso => "loso",
            SplitScheme::ExplicitHoldout => "explicit-holdout",
        }
    }
}

/// A named partition of instance indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub name: String,
    pub indices: Vec<usize>,
}

/// A full partitioning of the instance set with provenance of the scheme
/// that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub scheme: SplitScheme,
    pub seed: u64,
    pub partitions: Vec<Partition>,
}

impl FoldAssignment {
    pub fn partition(&self, name: &str) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.name == name)
    }

    pub fn total_instances(&self) -> usize {
        self.partitions.iter().map(|p| p.indices.len()).sum()
    }

    /// Checks that partitions are disjoint and cover `0..n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for part in &self.partitions {
            for &i in &part.indices {
                if i >= n {
                    return Err(Error::invariant(format!(
                        "partition '{}' references instance {i} out of {n}",
                        part.name
                    )));
                }
                if seen[i] {
                    return Err(Error::invariant(format!(
                        "instance {i} assigned to more than one partition"
                    )));
                }
                seen[i] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|&s| !s) {
            return Err(Error::invariant(format!(
                "instance {missing} not assigned to any partition"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn win(source: &str, start: usize, end: usize) -> Window {
        Window {
            source_id: source.to_string(),
            span: Span::new(start, end),
            label: 0,
            group_key: "g".to_string(),
        }
    }

    #[test]
    fn overlap_of_intersecting_spans() {
        assert_eq!(raw_overlap(&win("s", 0, 6), &win("s", 2, 8)), 4);
    }

    #[test]
    fn overlap_of_disjoint_spans_is_zero() {
        assert_eq!(raw_overlap(&win("s", 0, 6), &win("s", 6, 12)), 0);
    }

    #[test]
    fn overlap_at_dense_stride_parameters() {
        // size 128 windows starting at 0 and 64 share 64 samples
        assert_eq!(raw_overlap(&win("s", 0, 128), &win("s", 64, 192)), 64);
    }

    #[test]
    fn overlap_across_sources_is_zero() {
        assert_eq!(raw_overlap(&win("a", 0, 6), &win("b", 0, 6)), 0);
    }

    #[test]
    fn overlap_is_symmetric_and_self_overlap_is_size() {
        let a = win("s", 3, 10);
        let b = win("s", 5, 20);
        assert_eq!(raw_overlap(&a, &b), raw_overlap(&b, &a));
        assert_eq!(raw_overlap(&a, &a), a.span.len());
    }

    #[test]
    fn class_table_interning_is_stable() {
        let mut t = ClassTable::new();
        let a = t.intern("walk");
        let b = t.intern("sit");
        assert_eq!(t.intern("walk"), a);
        assert_eq!(t.name(b), "sit");
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn class_table_survives_serde_round_trip() {
        let mut t = ClassTable::new();
        t.intern("walk");
        t.intern("sit");
        let json = serde_json::to_string(&t).unwrap();
        let mut back: ClassTable = serde_json::from_str(&json).unwrap();
        assert_eq!(back.get("sit"), Some(1));
        assert_eq!(back.intern("walk"), 0);
        assert_eq!(back.intern("run"), 2);
    }

    #[test]
    fn fold_assignment_validation_catches_overlap_and_gaps() {
        let a = FoldAssignment {
            scheme: SplitScheme::RandomShuffle,
            seed: 0,
            partitions: vec![
                Partition {
                    name: "train".into(),
                    indices: vec![0, 1],
                },
                Partition {
                    name: "test".into(),
                    indices: vec![2],
                },
            ],
        };
        assert!(a.validate(3).is_ok());
        assert!(a.validate(4).is_err());
        let mut bad = a.clone();
        bad.partitions[1].indices = vec![1];
        assert!(bad.validate(3).is_err());
    }
}
