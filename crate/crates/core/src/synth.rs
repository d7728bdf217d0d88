//! Synthetic labeled streams with controllable temporal correlation, so the
//! evaluation-bias gap reproduces at desk scale without external datasets.
//!
//! Ambient streams follow a semi-Markov activity process: long activity
//! visits mean consecutive windows draw from nearly the same events, which is
//! exactly what makes random splits leak. Body streams are per-activity
//! sinusoids with additive per-subject offsets, making cross-subject
//! generalization strictly harder than within-subject.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassTable, Marker, SampleRow, SensorEvent, SensorKind, SensorValue};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub activities: usize,
    /// Ambient mode: number of ambient sensors.
    pub sensors: usize,
    /// Body mode: number of signal channels.
    pub channels: usize,
    /// Mean visit duration, in events (ambient) or samples (body).
    pub mean_duration: usize,
    /// Weight of an activity's own sensors relative to the rest; 1.0 means a
    /// uniform sensor distribution, large values make activities trivially
    /// identifiable.
    pub concentration: f64,
    pub subject_offset_scale: f64,
    pub subjects: usize,
    pub days: usize,
    pub noise: f64,
    pub seed: u64,
    /// Ambient volume knob.
    pub visits_per_day: usize,
    /// Body volume knob.
    pub visits_per_subject: usize,
}

impl SynthConfig {
    pub fn default_ambient() -> Self {
        SynthConfig {
            activities: 8,
            sensors: 20,
            channels: 0,
            mean_duration: 60,
            concentration: 1.6,
            subject_offset_scale: 0.0,
            subjects: 1,
            days: 10,
            noise: 0.25,
            seed: 42,
            visits_per_day: 10,
            visits_per_subject: 0,
        }
    }

    pub fn default_body() -> Self {
        SynthConfig {
            activities: 6,
            sensors: 0,
            channels: 9,
            mean_duration: 400,
            concentration: 0.0,
            subject_offset_scale: 1.0,
            subjects: 8,
            days: 0,
            noise: 1.0,
            seed: 42,
            visits_per_day: 0,
            visits_per_subject: 16,
        }
    }

    pub fn validate_ambient(&self) -> Result<()> {
        if self.activities < 1 || self.sensors < 1 || self.days < 1 || self.visits_per_day < 1 {
            return Err(Error::config("ambient synth counts must be >= 1"));
        }
        if self.mean_duration < 1 {
            return Err(Error::config("mean duration must be >= 1"));
        }
        if self.noise < 0.0 {
            return Err(Error::config("noise must be >= 0"));
        }
        Ok(())
    }

    pub fn validate_body(&self) -> Result<()> {
        if self.activities < 1
            || self.channels < 1
            || self.subjects < 1
            || self.visits_per_subject < 1
        {
            return Err(Error::config("body synth counts must be >= 1"));
        }
        if self.mean_duration < 1 {
            return Err(Error::config("mean duration must be >= 1"));
        }
        if self.noise < 0.0 {
            return Err(Error::config("noise must be >= 0"));
        }
        Ok(())
    }
}

pub fn activity_name(a: usize) -> String {
    format!("act{a}")
}

pub fn sensor_name(s: usize) -> String {
    format!("M{:03}", s + 1)
}

/// Rooms for the synthetic floor plan: each activity's own sensors share a
/// room, matching the real-world reason MI weighting works.
pub fn location_map(config: &SynthConfig) -> std::collections::HashMap<String, String> {
    (0..config.sensors)
        .map(|s| {
            let room = s % config.activities;
            (sensor_name(s), format!("room{room}"))
        })
        .collect()
}

/// Geometric visit length with the configured mean, support >= 1.
fn visit_length(rng: &mut ChaCha8Rng, mean: usize) -> usize {
    if mean <= 1 {
        return 1;
    }
    let p = 1.0 / mean as f64;
    let mut len = 1usize;
    while len < mean * 20 && rng.gen::<f64>() >= p {
        len += 1;
    }
    len
}

fn next_activity(rng: &mut ChaCha8Rng, current: Option<usize>, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    loop {
        let a = rng.gen_range(0..n);
        if Some(a) != current {
            return a;
        }
    }
}

/// Generates one labeled ambient event stream spanning `days` collection
/// days. Activity visits carry begin/end annotation markers so the stream
/// round-trips through the event-log format and label resolution.
pub fn generate_ambient_stream(
    config: &SynthConfig,
    classes: &mut ClassTable,
) -> Result<Vec<SensorEvent>> {
    config.validate_ambient()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let base_date = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();

    let labels: Vec<usize> = (0..config.activities)
        .map(|a| classes.intern(&activity_name(a)))
        .collect();

    // per-activity sensor weights: own sensors get the concentration weight
    let weights: Vec<Vec<f64>> = (0..config.activities)
        .map(|a| {
            (0..config.sensors)
                .map(|s| if s % config.activities == a { config.concentration } else { 1.0 })
                .collect()
        })
        .collect();

    let mut events = Vec::new();
    for day in 0..config.days {
        let mut t: NaiveDateTime = base_date
            .checked_add_signed(Duration::days(day as i64))
            .unwrap()
            .and_hms_opt(8, 0, 0)
            .unwrap();
        let mut activity: Option<usize> = None;
        for _ in 0..config.visits_per_day {
            let a = next_activity(&mut rng, activity, config.activities);
            activity = Some(a);
            let len = visit_length(&mut rng, config.mean_duration);
            for i in 0..len {
                t += Duration::seconds(rng.gen_range(1..=20));
                let sensor = if config.noise > 0.0 && rng.gen::<f64>() < config.noise {
                    rng.gen_range(0..config.sensors)
                } else {
                    weighted_choice(&mut rng, &weights[a])
                };
                let marker = if i == 0 {
                    Some(Marker::Begin)
                } else if i == len - 1 {
                    Some(Marker::End)
                } else {
                    None
                };
                events.push(SensorEvent {
                    timestamp: t,
                    sensor_id: sensor_name(sensor),
                    kind: SensorKind::Motion,
                    value: SensorValue::Binary(true),
                    annotation: marker.map(|m| crate::model::Annotation {
                        activity: activity_name(a),
                        marker: m,
                    }),
                    label: Some(labels[a]),
                });
            }
            // single-event visits: emit the matching end marker on a second
            // event so the annotation stream stays balanced
            if len == 1 {
                t += Duration::seconds(rng.gen_range(1..=20));
                let sensor = weighted_choice(&mut rng, &weights[a]);
                events.push(SensorEvent {
                    timestamp: t,
                    sensor_id: sensor_name(sensor),
                    kind: SensorKind::Motion,
                    value: SensorValue::Binary(true),
                    annotation: Some(crate::model::Annotation {
                        activity: activity_name(a),
                        marker: Marker::End,
                    }),
                    label: Some(labels[a]),
                });
            }
        }
    }
    Ok(events)
}

fn weighted_choice(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        x -= w;
        if x <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

/// Generates one labeled sample stream per subject. Channel signals are
/// activity-specific sinusoids plus a per-subject constant offset and
/// Gaussian noise.
pub fn generate_body_streams(
    config: &SynthConfig,
    classes: &mut ClassTable,
) -> Result<Vec<(String, Vec<SampleRow>)>> {
    config.validate_body()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let labels: Vec<usize> = (0..config.activities)
        .map(|a| classes.intern(&activity_name(a)))
        .collect();

    // activity signatures, drawn once
    let amp: Vec<Vec<f64>> = (0..config.activities)
        .map(|_| (0..config.channels).map(|_| rng.gen_range(0.9..1.1)).collect())
        .collect();
    let freq: Vec<Vec<f64>> = (0..config.activities)
        .map(|_| (0..config.channels).map(|_| rng.gen_range(0.5..3.0)).collect())
        .collect();

    let offset_dist = Normal::new(0.0, config.subject_offset_scale.max(1e-12)).unwrap();
    let noise_dist = Normal::new(0.0, config.noise.max(1e-12)).unwrap();

    let mut out = Vec::new();
    for s in 0..config.subjects {
        let subject_id = format!("s{s}");
        let offsets: Vec<f64> = (0..config.channels)
            .map(|_| {
                if config.subject_offset_scale > 0.0 {
                    offset_dist.sample(&mut rng)
                } else {
                    0.0
                }
            })
            .collect();
        let mut rows = Vec::new();
        let mut activity: Option<usize> = None;
        for _ in 0..config.visits_per_subject {
            let a = next_activity(&mut rng, activity, config.activities);
            activity = Some(a);
            let len = visit_length(&mut rng, config.mean_duration);
            let phase: Vec<f64> = (0..config.channels)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            for _ in 0..len {
                let t = rows.len() as f64 / 50.0; // 50 Hz
                let channels: Vec<f64> = (0..config.channels)
                    .map(|c| {
                        let signal = amp[a][c]
                            * (std::f64::consts::TAU * freq[a][c] * t + phase[c]).sin();
                        let noise = if config.noise > 0.0 {
                            noise_dist.sample(&mut rng)
                        } else {
                            0.0
                        };
                        signal + offsets[c] + noise
                    })
                    .collect();
                rows.push(SampleRow {
                    index: rows.len(),
                    channels,
                    label: labels[a],
                    subject_id: subject_id.clone(),
                });
            }
        }
        out.push((subject_id, rows));
    }
    Ok(out)
}

/// Serializes body sample rows into the whitespace-separated table format the
/// ingest module reads: channel columns then the label column.
pub fn serialize_sample_table(rows: &[SampleRow], classes: &ClassTable) -> String {
    let mut out = String::new();
    for row in rows {
        for v in &row.channels {
            out.push_str(&format!("{v:.6} "));
        }
        out.push_str(classes.name(row.label));
        out.push('\n');
    }
    out
}
