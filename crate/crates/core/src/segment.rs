//! Sliding-window segmentation over event and sample streams.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SampleRow, SensorEvent, Span, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentMode {
    EventCount,
    SampleCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// The last event in the window defines the label.
    LastEvent,
    /// Windows mixing more than one label are discarded.
    UniformActivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupRule {
    /// Group key = calendar date of the window's last event.
    ByDate,
    /// Group key = subject id of the stream.
    BySubject,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentationSpec {
    pub mode: SegmentMode,
    pub size: usize,
    pub step: usize,
    pub label_rule: LabelRule,
    pub group_rule: GroupRule,
}

impl SegmentationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.size < 1 {
            return Err(Error::config("segmentation size must be >= 1"));
        }
        if self.step < 1 || self.step > self.size {
            return Err(Error::config("segmentation step must satisfy 1 <= step <= size"));
        }
        Ok(())
    }

    /// Shared raw samples between consecutive windows.
    pub fn overlap(&self) -> usize {
        self.size - self.step
    }
}

/// Start offsets of all full-size windows over a stream of length `n`.
fn window_starts(n: usize, size: usize, step: usize) -> impl Iterator<Item = usize> {
    let count = if n < size { 0 } else { (n - size) / step + 1 };
    (0..count).map(move |i| i * step)
}

/// Number of full windows a stream of length `n` yields.
pub fn window_count(n: usize, size: usize, step: usize) -> usize {
    if n < size {
        0
    } else {
        (n - size) / step + 1
    }
}

/// Segments a labeled, time-ordered event stream into event-count windows.
/// Only full windows are emitted; the last event defines label and (under
/// by-date grouping) the group key.
pub fn segment_events(
    events: &[SensorEvent],
    spec: &SegmentationSpec,
    source_id: &str,
    subject_id: Option<&str>,
) -> Result<Vec<Window>> {
    spec.validate()?;
    if spec.mode != SegmentMode::EventCount {
        return Err(Error::config("segment_events requires event-count mode"));
    }
    let mut windows = Vec::new();
    for start in window_starts(events.len(), spec.size, spec.step) {
        let end = start + spec.size;
        let slice = &events[start..end];
        let last = &slice[spec.size - 1];
        let label = match spec.label_rule {
            LabelRule::LastEvent => last
                .label
                .ok_or_else(|| Error::invariant(format!("event {} has no label", end - 1)))?,
            LabelRule::UniformActivity => {
                let first = slice[0].label;
                if slice.iter().any(|e| e.label != first) {
                    continue;
                }
                first.ok_or_else(|| Error::invariant("unlabeled event".to_string()))?
            }
        };
        let group_key = match spec.group_rule {
            GroupRule::ByDate => last.timestamp.date().to_string(),
            GroupRule::BySubject => subject_id
                .ok_or_else(|| Error::config("by-subject grouping needs a subject id"))?
                .to_string(),
        };
        windows.push(Window {
            source_id: source_id.to_string(),
            span: Span::new(start, end),
            label,
            group_key,
        });
    }
    Ok(windows)
}

/// Segments a labeled sample stream into sample-count windows. With the
/// uniform-activity rule, windows spanning a label change are discarded.
pub fn segment_samples(
    samples: &[SampleRow],
    spec: &SegmentationSpec,
    source_id: &str,
) -> Result<Vec<Window>> {
    spec.validate()?;
    if spec.mode != SegmentMode::SampleCount {
        return Err(Error::config("segment_samples requires sample-count mode"));
    }
    let mut windows = Vec::new();
    for start in window_starts(samples.len(), spec.size, spec.step) {
        let end = start + spec.size;
        let slice = &samples[start..end];
        let label = match spec.label_rule {
            LabelRule::UniformActivity => {
                let first = slice[0].label;
                if slice.iter().any(|r| r.label != first) {
                    continue;
                }
                first
            }
            LabelRule::LastEvent => slice[spec.size - 1].label,
        };
        let group_key = match spec.group_rule {
            GroupRule::BySubject => slice[spec.size - 1].subject_id.clone(),
            GroupRule::ByDate => {
                return Err(Error::config("sample streams carry no dates; use by-subject"))
            }
        };
        windows.push(Window {
            source_id: source_id.to_string(),
            span: Span::new(start, end),
            label,
            group_key,
        });
    }
    Ok(windows)
}
