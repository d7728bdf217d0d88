//! Parsers for smart-home event logs and body-sensor sample tables, plus
//! resolution of begin/end activity annotations into per-event labels.

use std::collections::HashMap;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    Annotation, ClassId, ClassTable, Marker, SampleRow, SensorEvent, SensorKind, SensorValue,
};

pub const OTHER_CLASS: &str = "other";

/// Layout of a whitespace-separated event log: date, time, sensor id, value,
/// then an optional activity name and begin/end marker.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventLogSchema {
    /// chrono format string applied to the joined "<date> <time>" field.
    pub timestamp_format: String,
    /// Sensor-id prefix to kind mapping, longest prefix wins.
    pub kind_prefixes: Vec<(String, SensorKind)>,
    /// Fraction of malformed lines above which parsing aborts.
    pub max_malformed_fraction: f64,
}

impl Default for EventLogSchema {
    fn default() -> Self {
        EventLogSchema {
            timestamp_format: "%Y-%m-%d %H:%M:%S%.f".to_string(),
            kind_prefixes: vec![
                ("M".to_string(), SensorKind::Motion),
                ("D".to_string(), SensorKind::DoorContact),
                ("T".to_string(), SensorKind::Temperature),
            ],
            max_malformed_fraction: 0.10,
        }
    }
}

impl EventLogSchema {
    fn kind_of(&self, sensor_id: &str) -> Option<SensorKind> {
        self.kind_prefixes
            .iter()
            .filter(|(p, _)| sensor_id.starts_with(p.as_str()))
            .max_by_key(|(p, _)| p.len())
            .map(|(_, k)| *k)
    }
}

/// Where a sample table row's subject id comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubjectSource {
    Constant(String),
    Column(usize),
}

/// Layout of a whitespace-separated numeric sample table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleTableSchema {
    /// 0-based columns selected as channels, in channel order.
    pub channel_columns: Vec<usize>,
    pub label_column: usize,
    pub subject: SubjectSource,
    pub sample_rate_hz: f64,
    /// Numeric sentinel marking a missing value; NaN cells are always missing.
    pub missing_sentinel: Option<f64>,
    /// Label strings whose rows are dropped (e.g. a transient-activity id).
    pub excluded_labels: Vec<String>,
    /// Runs of consecutive missing rows longer than this split the stream.
    pub max_missing_run: usize,
}

impl SampleTableSchema {
    pub fn new(channel_columns: Vec<usize>, label_column: usize, subject: SubjectSource) -> Self {
        SampleTableSchema {
            channel_columns,
            label_column,
            subject,
            sample_rate_hz: 50.0,
            missing_sentinel: None,
            excluded_labels: Vec::new(),
            max_missing_run: 10,
        }
    }
}

/// One skipped input line with its 1-based line number.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedLine {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct EventLog {
    pub events: Vec<SensorEvent>,
    pub skipped: Vec<SkippedLine>,
}

/// Parses an event log into time-ordered sensor events. Malformed lines are
/// counted and skipped; more than `max_malformed_fraction` of them means the
/// schema does not match the file and parsing fails.
pub fn parse_event_log(input: &str, schema: &EventLogSchema) -> Result<EventLog> {
    let mut events = Vec::new();
    let mut skipped = Vec::new();
    let mut total = 0usize;

    for (lineno, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        total += 1;
        match parse_event_line(line, schema) {
            Ok(ev) => events.push(ev),
            Err(reason) => skipped.push(SkippedLine {
                line: lineno + 1,
                reason,
            }),
        }
    }

    if total > 0 && skipped.len() as f64 > schema.max_malformed_fraction * total as f64 {
        return Err(Error::format(format!(
            "{} of {} lines malformed; schema likely does not match input (first: line {}: {})",
            skipped.len(),
            total,
            skipped[0].line,
            skipped[0].reason
        )));
    }
    Ok(EventLog { events, skipped })
}

fn parse_event_line(line: &str, schema: &EventLogSchema) -> std::result::Result<SensorEvent, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(format!("expected >= 4 fields, found {}", fields.len()));
    }
    let ts = format!("{} {}", fields[0], fields[1]);
    let timestamp = NaiveDateTime::parse_from_str(&ts, &schema.timestamp_format)
        .map_err(|e| format!("bad timestamp '{ts}': {e}"))?;
    let sensor_id = fields[2].to_string();
    let kind = schema
        .kind_of(&sensor_id)
        .ok_or_else(|| format!("unknown sensor kind for id '{sensor_id}'"))?;
    let value = match kind {
        SensorKind::Motion | SensorKind::DoorContact => match fields[3] {
            "ON" | "OPEN" | "PRESENT" => SensorValue::Binary(true),
            "OFF" | "CLOSE" | "ABSENT" => SensorValue::Binary(false),
            other => return Err(format!("bad binary value '{other}'")),
        },
        SensorKind::Temperature => {
            let v: f64 = fields[3]
                .parse()
                .map_err(|_| format!("bad temperature value '{}'", fields[3]))?;
            if !v.is_finite() {
                return Err("non-finite temperature".to_string());
            }
            SensorValue::Reading(v)
        }
    };
    let annotation = match fields.len() {
        4 => None,
        6 => {
            let marker = match fields[5].to_ascii_lowercase().as_str() {
                "begin" => Marker::Begin,
                "end" => Marker::End,
                other => return Err(format!("bad annotation marker '{other}'")),
            };
            Some(Annotation {
                activity: fields[4].to_string(),
                marker,
            })
        }
        n => return Err(format!("expected 4 or 6 fields, found {n}")),
    };
    Ok(SensorEvent {
        timestamp,
        sensor_id,
        kind,
        value,
        annotation,
        label: None,
    })
}

/// Assigns every event a label from the enclosing begin/end annotation span.
/// Events outside any span get the "other" class. Nested spans resolve
/// innermost-activity-wins. Returns human-readable warnings for unbalanced
/// markers.
pub fn resolve_labels(events: &mut [SensorEvent], classes: &mut ClassTable) -> Vec<String> {
    let other = classes.intern(OTHER_CLASS);
    let mut warnings = Vec::new();
    // stack of open activities, innermost last
    let mut open: Vec<(String, ClassId)> = Vec::new();

    for (i, ev) in events.iter_mut().enumerate() {
        let annotation = ev.annotation.clone();
        match annotation {
            Some(Annotation {
                activity,
                marker: Marker::Begin,
            }) => {
                let id = classes.intern(&activity);
                open.push((activity, id));
                ev.label = Some(id);
            }
            Some(Annotation {
                activity,
                marker: Marker::End,
            }) => {
                if let Some(pos) = open.iter().rposition(|(a, _)| *a == activity) {
                    // the end marker itself still belongs to the activity
                    ev.label = Some(open[pos].1);
                    open.remove(pos);
                } else {
                    warnings.push(format!(
                        "event {i}: end marker for '{activity}' without matching begin; ignored"
                    ));
                    ev.label = Some(open.last().map(|(_, id)| *id).unwrap_or(other));
                }
            }
            None => {
                ev.label = Some(open.last().map(|(_, id)| *id).unwrap_or(other));
            }
        }
    }
    for (activity, _) in &open {
        warnings.push(format!(
            "begin marker for '{activity}' never closed; span runs to stream end"
        ));
    }
    warnings
}

/// Serializes events back into the event-log line format (used by the
/// synthetic generator and the parse/serialize round-trip property).
pub fn serialize_event_log(events: &[SensorEvent], classes: &ClassTable) -> String {
    let _ = classes;
    let mut out = String::new();
    for ev in events {
        let value = match ev.value {
            SensorValue::Binary(true) => "ON".to_string(),
            SensorValue::Binary(false) => "OFF".to_string(),
            SensorValue::Reading(v) => format!("{v}"),
        };
        out.push_str(&format!(
            "{} {} {}",
            ev.timestamp.format("%Y-%m-%d %H:%M:%S%.6f"),
            ev.sensor_id,
            value
        ));
        if let Some(ann) = &ev.annotation {
            let marker = match ann.marker {
                Marker::Begin => "begin",
                Marker::End => "end",
            };
            out.push_str(&format!(" {} {}", ann.activity, marker));
        }
        out.push('\n');
    }
    out
}

/// Parses a numeric sample table. Rows containing the missing sentinel are
/// linearly interpolated when interior; runs longer than
/// `schema.max_missing_run` split the stream into separate segments so no
/// window may bridge the gap. Rows with excluded labels are dropped.
pub fn parse_sample_table(
    input: &str,
    schema: &SampleTableSchema,
    classes: &mut ClassTable,
) -> Result<Vec<Vec<SampleRow>>> {
    struct RawRow {
        channels: Vec<Option<f64>>,
        label: String,
        subject: String,
    }

    let mut raw: Vec<RawRow> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let needed = schema
            .channel_columns
            .iter()
            .chain(std::iter::once(&schema.label_column))
            .copied()
            .max()
            .unwrap_or(0);
        if fields.len() <= needed {
            return Err(Error::format(format!(
                "row {}: {} columns, schema needs at least {}",
                lineno + 1,
                fields.len(),
                needed + 1
            )));
        }
        let mut channels = Vec::with_capacity(schema.channel_columns.len());
        for &col in &schema.channel_columns {
            let cell = fields[col];
            let v: f64 = cell.parse().map_err(|_| {
                Error::format(format!(
                    "row {}: non-numeric cell '{cell}' in channel column {col}",
                    lineno + 1
                ))
            })?;
            let missing = v.is_nan() || schema.missing_sentinel.map_or(false, |s| v == s);
            channels.push(if missing { None } else { Some(v) });
        }
        let label = fields[schema.label_column].to_string();
        let subject = match &schema.subject {
            SubjectSource::Constant(s) => s.clone(),
            SubjectSource::Column(c) => fields
                .get(*c)
                .ok_or_else(|| {
                    Error::format(format!("row {}: missing subject column {c}", lineno + 1))
                })?
                .to_string(),
        };
        raw.push(RawRow {
            channels,
            label,
            subject,
        });
    }

    // split at runs of missing rows longer than max_missing_run
    let is_missing = |r: &RawRow| r.channels.iter().any(|c| c.is_none());
    let mut segments: Vec<Vec<RawRow>> = Vec::new();
    let mut current: Vec<RawRow> = Vec::new();
    let mut missing_run = 0usize;
    for row in raw {
        if is_missing(&row) {
            missing_run += 1;
            current.push(row);
            if missing_run > schema.max_missing_run {
                // drop the whole missing run and close the segment
                current.truncate(current.len() - missing_run);
                missing_run = 0;
                if !current.is_empty() {
                    segments.push(std::mem::take(&mut current));
                }
            }
        } else {
            missing_run = 0;
            current.push(row);
        }
    }
    if missing_run > 0 {
        current.truncate(current.len() - missing_run);
    }
    if !current.is_empty() {
        segments.push(current);
    }

    let mut out = Vec::new();
    for seg in &mut segments {
        // trim missing rows at segment edges
        while seg.first().map_or(false, |r| is_missing(r)) {
            seg.remove(0);
        }
        while seg.last().map_or(false, |r| is_missing(r)) {
            seg.pop();
        }
        if seg.is_empty() {
            continue;
        }
        // interior missing values: linear interpolation per channel
        for ch in 0..schema.channel_columns.len() {
            let mut i = 0;
            while i < seg.len() {
                if seg[i].channels[ch].is_none() {
                    let lo = i - 1; // edges were trimmed, lo exists
                    let mut hi = i;
                    while seg[hi].channels[ch].is_none() {
                        hi += 1;
                    }
                    let a = seg[lo].channels[ch].unwrap();
                    let b = seg[hi].channels[ch].unwrap();
                    let gap = (hi - lo) as f64;
                    for j in (lo + 1)..hi {
                        let t = (j - lo) as f64 / gap;
                        seg[j].channels[ch] = Some(a + (b - a) * t);
                    }
                    i = hi;
                }
                i += 1;
            }
        }

        let mut rows = Vec::new();
        for r in seg.iter() {
            if schema.excluded_labels.iter().any(|x| *x == r.label) {
                continue;
            }
            rows.push(SampleRow {
                index: rows.len(),
                channels: r.channels.iter().map(|c| c.unwrap()).collect(),
                label: classes.intern(&r.label),
                subject_id: r.subject.clone(),
            });
        }
        if !rows.is_empty() {
            out.push(rows);
        }
    }
    Ok(out)
}

/// Dataset manifest: lists files, the schema to apply, and auxiliary tables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub kind: DatasetKind,
    pub files: Vec<ManifestFile>,
    #[serde(default)]
    pub event_schema: Option<EventLogSchema>,
    #[serde(default)]
    pub sample_schema: Option<SampleTableSchema>,
    /// Sensor id -> room name, for the location features.
    #[serde(default)]
    pub location_map: HashMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Event logs from ambient binary/analog sensors.
    Ambient,
    /// Fixed-rate body-sensor sample tables.
    Body,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub path: String,
    #[serde(default)]
    pub subject_id: Option<String>,
}

impl DatasetManifest {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("manifest {}: {e}", path.display())))
    }
}
