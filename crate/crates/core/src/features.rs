//! Feature extraction: MI-weighted activation counts and companion features
//! for event windows, per-channel statistics and Pearson correlation graphs
//! for sample windows.
//!
//! The MI matrix and the event feature extractor are fit on training windows
//! only; fitting them on the full dataset would itself leak.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{SampleRow, SensorEvent, SensorKind, SensorValue};

/// First-order sensor transition frequencies. Entry (i, j) is the fraction of
/// consecutive event pairs in which sensor i fires and sensor j fires next.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiMatrix {
    sensors: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    matrix: Vec<Vec<f64>>,
}

impl MiMatrix {
    pub fn sensors(&self) -> &[String] {
        &self.sensors
    }

    /// MI value for the ordered pair (from, to); 0 for sensors unseen during
    /// training.
    pub fn get(&self, from: &str, to: &str) -> f64 {
        match (self.lookup(from), self.lookup(to)) {
            (Some(i), Some(j)) => self.matrix[i][j],
            _ => 0.0,
        }
    }

    fn lookup(&self, sensor: &str) -> Option<usize> {
        if self.index.is_empty() && !self.sensors.is_empty() {
            return self.sensors.iter().position(|s| s == sensor);
        }
        self.index.get(sensor).copied()
    }
}

/// Computes the MI matrix from a training event stream. With fewer than two
/// events there are no transitions and the matrix is all zero.
pub fn compute_mi_matrix(events: &[SensorEvent], sensors: &[String]) -> MiMatrix {
    compute_mi_matrix_slices(&[events], sensors)
}

/// As [`compute_mi_matrix`], over several disjoint training slices (e.g. the
/// merged raw spans of the training windows). Pairs never straddle a slice
/// boundary.
pub fn compute_mi_matrix_slices(slices: &[&[SensorEvent]], sensors: &[String]) -> MiMatrix {
    let index: HashMap<String, usize> = sensors
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    let n = sensors.len();
    let mut counts = vec![vec![0u64; n]; n];
    let mut total = 0u64;
    for events in slices {
        for pair in events.windows(2) {
            if let (Some(&i), Some(&j)) =
                (index.get(&pair[0].sensor_id), index.get(&pair[1].sensor_id))
            {
                counts[i][j] += 1;
            }
            total += 1;
        }
    }
    let matrix = counts
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                .collect()
        })
        .collect();
    MiMatrix {
        sensors: sensors.to_vec(),
        index,
        matrix,
    }
}

/// Maps a cyclical value onto the unit circle.
pub fn cyclic_encode(value: f64, period: f64) -> (f64, f64) {
    let angle = 2.0 * PI * value / period;
    (angle.sin(), angle.cos())
}

/// Shannon entropy (base 2) of the sensor-id distribution within a window.
pub fn window_entropy(events: &[SensorEvent]) -> f64 {
    // BTreeMap fixes the summation order; HashMap order varies per instance
    // and float addition is not associative
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for ev in events {
        *counts.entry(ev.sensor_id.as_str()).or_default() += 1;
    }
    let total = events.len() as f64;
    counts
        .values()
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.log2()
        })
        .sum()
}

/// 1 minus the fraction of nonzero entries in an activation-count vector.
pub fn sparsity(counts: &[f64]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::invariant("sparsity of a zero-length vector"));
    }
    let nonzero = counts.iter().filter(|&&c| c != 0.0).count();
    Ok(1.0 - nonzero as f64 / counts.len() as f64)
}

/// Ordered, named feature slots. Serialized into every report so downstream
/// columns are self-describing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub slots: Vec<String>,
}

impl FeatureSchema {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }

    /// Per-channel mean/std/min/max layout for sample windows.
    pub fn imu_stats(channel_count: usize) -> Self {
        let mut slots = Vec::with_capacity(channel_count * 4);
        for c in 0..channel_count {
            for stat in ["mean", "std", "min", "max"] {
                slots.push(format!("ch{c}_{stat}"));
            }
        }
        FeatureSchema { slots }
    }
}

/// Extractor for ambient event windows. Holds everything fit on training
/// data: the MI matrix, the sensor table and the room table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventFeatureExtractor {
    pub mi: MiMatrix,
    sensors: Vec<String>,
    rooms: Vec<String>,
    locations: HashMap<String, String>,
    pub schema: FeatureSchema,
}

impl EventFeatureExtractor {
    /// Fits the extractor: `sensors` enumerates every sensor the run may see
    /// (from the full stream's id set), `training_events` feed the MI matrix,
    /// and `locations` maps each sensor to a room.
    pub fn fit(
        sensors: &[String],
        training_events: &[SensorEvent],
        locations: &HashMap<String, String>,
    ) -> Result<Self> {
        Self::fit_slices(sensors, &[training_events], locations)
    }

    /// As [`EventFeatureExtractor::fit`], over disjoint training slices.
    pub fn fit_slices(
        sensors: &[String],
        training_slices: &[&[SensorEvent]],
        locations: &HashMap<String, String>,
    ) -> Result<Self> {
        for s in sensors {
            if !locations.contains_key(s) {
                return Err(Error::config(format!("sensor '{s}' missing from location map")));
            }
        }
        let mut rooms: Vec<String> = locations.values().cloned().collect();
        rooms.sort();
        rooms.dedup();

        let act_sensors: Vec<&String> = sensors.iter().collect();
        let mut slots = vec![
            "hour_sin".to_string(),
            "hour_cos".to_string(),
            "dow_sin".to_string(),
            "dow_cos".to_string(),
        ];
        slots.extend(act_sensors.iter().map(|s| format!("act[{s}]")));
        slots.push("last_status".to_string());
        slots.push("avg_temp".to_string());
        slots.push("temp_present".to_string());
        slots.push("entropy".to_string());
        slots.push("sparsity".to_string());
        slots.extend(rooms.iter().map(|r| format!("loc_last[{r}]")));
        slots.extend(rooms.iter().map(|r| format!("loc_motion[{r}]")));

        Ok(EventFeatureExtractor {
            mi: compute_mi_matrix_slices(training_slices, sensors),
            sensors: sensors.to_vec(),
            rooms,
            locations: locations.clone(),
            schema: FeatureSchema { slots },
        })
    }

    /// Feature vector for one event window.
    pub fn extract(&self, window: &[SensorEvent]) -> Result<Vec<f64>> {
        if window.is_empty() {
            return Err(Error::invariant("feature extraction on an empty window"));
        }
        let last = window.last().unwrap();
        let mut out = Vec::with_capacity(self.schema.len());

        use chrono::Timelike;
        let t = last.timestamp.time();
        let hour = t.hour() as f64 + t.minute() as f64 / 60.0 + t.second() as f64 / 3600.0;
        let (hs, hc) = cyclic_encode(hour, 24.0);
        let dow = last.timestamp.date().format("%u").to_string().parse::<f64>().unwrap() - 1.0;
        let (ds, dc) = cyclic_encode(dow, 7.0);
        out.extend([hs, hc, ds, dc]);

        // unweighted activation counts: ON count for motion, appearances for
        // contacts; temperature sensors do not activate
        let mut counts = vec![0.0f64; self.sensors.len()];
        for ev in window {
            let activated = match ev.kind {
                SensorKind::Motion => ev.value == SensorValue::Binary(true),
                SensorKind::DoorContact => true,
                SensorKind::Temperature => false,
            };
            if activated {
                if let Some(i) = self.sensors.iter().position(|s| *s == ev.sensor_id) {
                    counts[i] += 1.0;
                }
            }
        }
        for (i, sensor) in self.sensors.iter().enumerate() {
            out.push(counts[i] * self.mi.get(sensor, &last.sensor_id));
        }

        out.push(match last.value {
            SensorValue::Binary(true) => 1.0,
            _ => 0.0,
        });

        let temps: Vec<f64> = window
            .iter()
            .filter_map(|e| match e.value {
                SensorValue::Reading(v) if e.kind == SensorKind::Temperature => Some(v),
                _ => None,
            })
            .collect();
        if temps.is_empty() {
            out.push(0.0);
            out.push(0.0);
        } else {
            out.push(temps.iter().sum::<f64>() / temps.len() as f64);
            out.push(1.0);
        }

        out.push(window_entropy(window));
        out.push(sparsity(&counts)?);

        let last_room = self.locations.get(&last.sensor_id).ok_or_else(|| {
            Error::config(format!("sensor '{}' missing from location map", last.sensor_id))
        })?;
        let last_motion_room = window
            .iter()
            .rev()
            .find(|e| e.kind == SensorKind::Motion)
            .map(|e| self.locations.get(&e.sensor_id))
            .flatten();
        for room in &self.rooms {
            out.push(if room == last_room { 1.0 } else { 0.0 });
        }
        for room in &self.rooms {
            out.push(if Some(room) == last_motion_room { 1.0 } else { 0.0 });
        }

        debug_assert_eq!(out.len(), self.schema.len());
        Ok(out)
    }
}

/// Per-channel mean, population standard deviation, minimum and maximum,
/// concatenated in channel order.
pub fn sample_window_stats(window: &[SampleRow]) -> Result<Vec<f64>> {
    if window.is_empty() {
        return Err(Error::invariant("stats of an empty window"));
    }
    let channels = window[0].channels.len();
    let n = window.len() as f64;
    let mut out = Vec::with_capacity(channels * 4);
    for c in 0..channels {
        let mut sum = 0.0;
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for row in window {
            let v = row.channels[c];
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        let mean = sum / n;
        let var = window
            .iter()
            .map(|r| (r.channels[c] - mean).powi(2))
            .sum::<f64>()
            / n;
        out.extend([mean, var.sqrt(), min, max]);
    }
    Ok(out)
}

/// Undirected channel graph: an edge wherever Pearson correlation exceeds the
/// threshold. Zero-variance channels correlate 0 with everything.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelGraph {
    pub channel_count: usize,
    /// (smaller channel, larger channel, correlation)
    pub edges: Vec<(usize, usize, f64)>,
}

impl ChannelGraph {
    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        let (a, b) = (a.min(b), a.max(b));
        self.edges.iter().any(|&(x, y, _)| x == a && y == b)
    }
}

/// Pearson correlation between two equal-length series; 0 when either side
/// has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Builds the correlation graph for a sample window.
pub fn correlation_graph(window: &[SampleRow], threshold: f64) -> Result<ChannelGraph> {
    if window.len() < 2 {
        return Err(Error::invariant("correlation graph needs at least 2 samples"));
    }
    let channels = window[0].channels.len();
    let series: Vec<Vec<f64>> = (0..channels)
        .map(|c| window.iter().map(|r| r.channels[c]).collect())
        .collect();
    let mut edges = Vec::new();
    for a in 0..channels {
        for b in (a + 1)..channels {
            let r = pearson(&series[a], &series[b]);
            if r > threshold {
                edges.push((a, b, r));
            }
        }
    }
    Ok(ChannelGraph {
        channel_count: channels,
        edges,
    })
}
