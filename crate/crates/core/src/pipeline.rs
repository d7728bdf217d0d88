//! Config-driven experiment harness: wires ingestion, segmentation, feature
//! extraction, partitioning, classification and auditing end to end, and
//! persists the comparison reports.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{self, AuditReport};
use crate::error::{Error, Result};
use crate::features::{sample_window_stats, EventFeatureExtractor, FeatureSchema};
use crate::forest::{train_forest, ForestParams};
use crate::ingest::{
    parse_event_log, parse_sample_table, resolve_labels, DatasetKind, DatasetManifest,
    EventLogSchema, SampleTableSchema, SubjectSource,
};
use crate::metrics::{confusion, ConfusionMatrix};
use crate::model::{
    ClassId, ClassTable, FoldAssignment, LabeledInstance, Partition, SensorEvent, Span,
    SplitScheme, Window,
};
use crate::segment::{segment_events, segment_samples, SegmentationSpec};
use crate::split::{loso_split, SplitSpec};
use crate::synth::{self, SynthConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataSource {
    /// Locally downloaded dataset described by a manifest file.
    Manifest { path: PathBuf },
    SynthAmbient(SynthConfig),
    SynthBody(SynthConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    /// MI-weighted activation counts plus time/status/entropy/location slots.
    Milan,
    /// Per-channel mean/std/min/max statistics.
    ImuStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub segmentation: SegmentationSpec,
    pub feature_set: FeatureSet,
    pub splits: Vec<SplitSpec>,
    pub classifier: ForestParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("config {}: {e}", path.display())))
    }

    /// Content hash identifying the configuration in reports.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        hex_digest(&hasher.finalize())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn schema_fingerprint(schema: &FeatureSchema) -> String {
    let mut hasher = Sha256::new();
    for slot in &schema.slots {
        hasher.update(slot.as_bytes());
        hasher.update([0u8]);
    }
    hex_digest(&hasher.finalize())
}

/// Dataset loaded into memory, before segmentation.
pub struct Dataset {
    pub classes: ClassTable,
    pub ambient: Vec<AmbientStream>,
    pub body: Vec<BodyStream>,
    pub locations: HashMap<String, String>,
}

pub struct AmbientStream {
    pub source_id: String,
    pub events: Vec<SensorEvent>,
    pub subject_id: Option<String>,
}

pub struct BodyStream {
    pub source_id: String,
    pub rows: Vec<crate::model::SampleRow>,
}

pub fn load_dataset(source: &DataSource) -> Result<Dataset> {
    match source {
        DataSource::SynthAmbient(config) => {
            let mut classes = ClassTable::new();
            let events = synth::generate_ambient_stream(config, &mut classes)?;
            // one source per calendar day, so date groups align with sources
            // and windows never straddle midnight
            let mut ambient: Vec<AmbientStream> = Vec::new();
            for ev in events {
                let date = ev.timestamp.date().to_string();
                match ambient.last_mut() {
                    Some(stream) if stream.source_id.ends_with(&date) => stream.events.push(ev),
                    _ => ambient.push(AmbientStream {
                        source_id: format!("synth-ambient-{date}"),
                        events: vec![ev],
                        subject_id: None,
                    }),
                }
            }
            Ok(Dataset {
                classes,
                ambient,
                body: Vec::new(),
                locations: synth::location_map(config),
            })
        }
        DataSource::SynthBody(config) => {
            let mut classes = ClassTable::new();
            let streams = synth::generate_body_streams(config, &mut classes)?;
            Ok(Dataset {
                classes,
                ambient: Vec::new(),
                body: streams
                    .into_iter()
                    .map(|(subject, rows)| BodyStream {
                        source_id: subject,
                        rows,
                    })
                    .collect(),
                locations: HashMap::new(),
            })
        }
        DataSource::Manifest { path } => load_manifest_dataset(path),
    }
}

fn load_manifest_dataset(path: &Path) -> Result<Dataset> {
    if !path.exists() {
        return Err(Error::config(format!(
            "manifest path {} does not exist",
            path.display()
        )));
    }
    let manifest = DatasetManifest::load(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut classes = ClassTable::new();
    match manifest.kind {
        DatasetKind::Ambient => {
            let schema = manifest.event_schema.clone().unwrap_or_else(EventLogSchema::default);
            let mut ambient = Vec::new();
            for file in &manifest.files {
                let fpath = base.join(&file.path);
                let text = std::fs::read_to_string(&fpath).map_err(|e| Error::io(&fpath, e))?;
                let log = parse_event_log(&text, &schema)?;
                let mut events = log.events;
                resolve_labels(&mut events, &mut classes);
                ambient.push(AmbientStream {
                    source_id: file.path.clone(),
                    events,
                    subject_id: file.subject_id.clone(),
                });
            }
            Ok(Dataset {
                classes,
                ambient,
                body: Vec::new(),
                locations: manifest.location_map.clone(),
            })
        }
        DatasetKind::Body => {
            let schema: SampleTableSchema = manifest
                .sample_schema
                .clone()
                .ok_or_else(|| Error::config("body manifest needs a sample_schema"))?;
            let mut body = Vec::new();
            for file in &manifest.files {
                let fpath = base.join(&file.path);
                let text = std::fs::read_to_string(&fpath).map_err(|e| Error::io(&fpath, e))?;
                let mut schema = schema.clone();
                if let Some(subject) = &file.subject_id {
                    schema.subject = SubjectSource::Constant(subject.clone());
                }
                for (i, segment) in parse_sample_table(&text, &schema, &mut classes)?
                    .into_iter()
                    .enumerate()
                {
                    body.push(BodyStream {
                        source_id: format!("{}#{}", file.path, i),
                        rows: segment,
                    });
                }
            }
            Ok(Dataset {
                classes,
                ambient: Vec::new(),
                body,
                locations: HashMap::new(),
            })
        }
    }
}

/// Segmented dataset: windows plus the instance skeletons (features filled in
/// per-split, after fitting on the training side only).
pub struct Prepared {
    pub dataset: Dataset,
    pub windows: Vec<Window>,
}

pub fn prepare(config: &ExperimentConfig) -> Result<Prepared> {
    let dataset = load_dataset(&config.source).map_err(|e| e.in_stage("ingest"))?;
    let mut windows = Vec::new();
    for stream in &dataset.ambient {
        windows.extend(
            segment_events(
                &stream.events,
                &config.segmentation,
                &stream.source_id,
                stream.subject_id.as_deref(),
            )
            .map_err(|e| e.in_stage("segment"))?,
        );
    }
    for stream in &dataset.body {
        windows.extend(
            segment_samples(&stream.rows, &config.segmentation, &stream.source_id)
                .map_err(|e| e.in_stage("segment"))?,
        );
    }
    if windows.is_empty() {
        return Err(Error::config("segmentation produced no windows").in_stage("segment"));
    }
    Ok(Prepared { dataset, windows })
}

impl Prepared {
    /// Instances without features, enough for splitting and auditing.
    pub fn skeleton_instances(&self) -> Vec<LabeledInstance> {
        self.windows
            .iter()
            .map(|w| LabeledInstance {
                features: Vec::new(),
                label: w.label,
                group_key: w.group_key.clone(),
                span: w.span,
                source_id: w.source_id.clone(),
            })
            .collect()
    }

    fn ambient_stream(&self, source_id: &str) -> Option<&AmbientStream> {
        self.dataset.ambient.iter().find(|s| s.source_id == source_id)
    }

    fn body_stream(&self, source_id: &str) -> Option<&BodyStream> {
        self.dataset.body.iter().find(|s| s.source_id == source_id)
    }

    /// Fits the feature extractor on the training windows only and computes
    /// feature vectors for every window. Returns the schema alongside.
    pub fn featurize(
        &self,
        feature_set: FeatureSet,
        train_indices: &[usize],
    ) -> Result<(Vec<LabeledInstance>, FeatureSchema)> {
        match feature_set {
            FeatureSet::Milan => self.featurize_milan(train_indices),
            FeatureSet::ImuStats => self.featurize_imu(),
        }
        .map_err(|e| e.in_stage("features"))
    }

    fn featurize_milan(&self, train_indices: &[usize]) -> Result<(Vec<LabeledInstance>, FeatureSchema)> {
        if self.dataset.ambient.is_empty() {
            return Err(Error::config("milan features need an ambient dataset"));
        }
        let mut sensors: Vec<String> = self
            .dataset
            .ambient
            .iter()
            .flat_map(|s| s.events.iter().map(|e| e.sensor_id.clone()))
            .collect();
        sensors.sort();
        sensors.dedup();

        // training slices = merged raw spans of the training windows
        let mut spans_by_source: std::collections::BTreeMap<&str, Vec<Span>> =
            std::collections::BTreeMap::new();
        for &i in train_indices {
            let w = &self.windows[i];
            spans_by_source.entry(w.source_id.as_str()).or_default().push(w.span);
        }
        let mut slices: Vec<&[SensorEvent]> = Vec::new();
        for (source, mut spans) in spans_by_source {
            let stream = self
                .ambient_stream(source)
                .ok_or_else(|| Error::invariant(format!("unknown source '{source}'")))?;
            spans.sort_by_key(|s| s.start);
            let mut merged: Vec<Span> = Vec::new();
            for s in spans {
                match merged.last_mut() {
                    Some(last) if s.start <= last.end => last.end = last.end.max(s.end),
                    _ => merged.push(s),
                }
            }
            for s in merged {
                slices.push(&stream.events[s.start..s.end]);
            }
        }

        let extractor = EventFeatureExtractor::fit_slices(&sensors, &slices, &self.dataset.locations)?;
        let mut instances = self.skeleton_instances();
        use rayon::prelude::*;
        let features: Vec<Result<Vec<f64>>> = self
            .windows
            .par_iter()
            .map(|w| {
                let stream = self
                    .ambient_stream(&w.source_id)
                    .ok_or_else(|| Error::invariant(format!("unknown source '{}'", w.source_id)))?;
                extractor.extract(&stream.events[w.span.start..w.span.end])
            })
            .collect();
        for (inst, f) in instances.iter_mut().zip(features) {
            inst.features = f?;
        }
        Ok((instances, extractor.schema))
    }

    fn featurize_imu(&self) -> Result<(Vec<LabeledInstance>, FeatureSchema)> {
        if self.dataset.body.is_empty() {
            return Err(Error::config("imu-stats features need a body dataset"));
        }
        let channels = self.dataset.body[0].rows[0].channels.len();
        let schema = FeatureSchema::imu_stats(channels);
        let mut instances = self.skeleton_instances();
        use rayon::prelude::*;
        let features: Vec<Result<Vec<f64>>> = self
            .windows
            .par_iter()
            .map(|w| {
                let stream = self
                    .body_stream(&w.source_id)
                    .ok_or_else(|| Error::invariant(format!("unknown source '{}'", w.source_id)))?;
                sample_window_stats(&stream.rows[w.span.start..w.span.end])
            })
            .collect();
        for (inst, f) in instances.iter_mut().zip(features) {
            inst.features = f?;
        }
        Ok((instances, schema))
    }
}

/// Train/test index pair evaluated for one assignment.
struct EvalSplit {
    train: Vec<usize>,
    test: Vec<usize>,
}

/// Reduces a fold assignment to the train/test pair the harness evaluates.
/// For k-fold schemes, `eval_fold` tests and the rest trains; ratio schemes
/// evaluate train vs test (validation stays untouched).
fn eval_split(assignment: &FoldAssignment, eval_fold: usize) -> Result<EvalSplit> {
    if assignment.partition("train").is_some() {
        let train = assignment.partition("train").unwrap().indices.clone();
        let test = assignment
            .partition("test")
            .ok_or_else(|| Error::invariant("assignment lacks a test partition"))?
            .indices
            .clone();
        return Ok(EvalSplit { train, test });
    }
    let fold_name = format!("fold{eval_fold}");
    if assignment.partition(&fold_name).is_none() {
        return Err(Error::config(format!("no fold {eval_fold} to evaluate")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for p in &assignment.partitions {
        if p.name == fold_name {
            test.extend(&p.indices);
        } else {
            train.extend(&p.indices);
        }
    }
    Ok(EvalSplit { train, test })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub balanced_accuracy: f64,
    pub weighted_f1: f64,
    pub per_class_f1: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub config_fingerprint: String,
    pub scheme: String,
    pub seed: u64,
    pub feature_schema: FeatureSchema,
    pub metrics: MetricsSummary,
    pub confusion: ConfusionMatrix,
    pub audit: AuditReport,
    pub assignment: FoldAssignment,
    /// (instance index, truth, prediction) over the evaluated test set.
    pub predictions: Vec<(usize, ClassId, ClassId)>,
    pub timings_ms: HashMap<String, u128>,
}

/// Runs the full pipeline for one split spec and returns the report.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    if config.splits.len() != 1 {
        return Err(Error::config(format!(
            "run expects exactly one split spec, found {}",
            config.splits.len()
        )));
    }
    let prepared = prepare(config)?;
    let report = run_split(config, &prepared, &config.splits[0])?;
    if let Some(dir) = &config.output_dir {
        persist_run(dir, &report)?;
    }
    Ok(report)
}

fn run_split(
    config: &ExperimentConfig,
    prepared: &Prepared,
    split: &SplitSpec,
) -> Result<RunReport> {
    let mut timings: HashMap<String, u128> = HashMap::new();
    let skeletons = prepared.skeleton_instances();

    let t0 = Instant::now();
    let (assignment, folds): (FoldAssignment, Vec<EvalSplit>) =
        if split.scheme == SplitScheme::Loso {
            let assignments = loso_split(&skeletons).map_err(|e| e.in_stage("split"))?;
            let folds = assignments
                .iter()
                .map(|a| eval_split(a, 0))
                .collect::<Result<Vec<_>>>()?;
            // summarize LOSO as one multi-fold assignment keyed by subject
            let partitions = assignments
                .iter()
                .map(|a| {
                    let test = a.partition("test").unwrap();
                    let subject = skeletons[test.indices[0]].group_key.clone();
                    Partition {
                        name: format!("subject:{subject}"),
                        indices: test.indices.clone(),
                    }
                })
                .collect();
            (
                FoldAssignment {
                    scheme: SplitScheme::Loso,
                    seed: config.seed,
                    partitions,
                },
                folds,
            )
        } else {
            let assignment = split
                .apply(&skeletons, config.seed)
                .map_err(|e| e.in_stage("split"))?;
            let fold = eval_split(&assignment, split.eval_fold.unwrap_or(0))?;
            (assignment, vec![fold])
        };
    timings.insert("split".into(), t0.elapsed().as_millis());

    // pooled evaluation over the fold list (a single fold for most schemes)
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    let mut predictions = Vec::new();
    let mut schema: Option<FeatureSchema> = None;
    let mut feature_ms = 0u128;
    let mut train_ms = 0u128;
    for fold in &folds {
        let t1 = Instant::now();
        let (instances, fold_schema) = prepared.featurize(config.feature_set, &fold.train)?;
        feature_ms += t1.elapsed().as_millis();
        let fp = schema_fingerprint(&fold_schema);
        schema.get_or_insert(fold_schema);

        let t2 = Instant::now();
        let train_set: Vec<LabeledInstance> =
            fold.train.iter().map(|&i| instances[i].clone()).collect();
        let model = train_forest(
            &train_set,
            &config.classifier,
            config.seed,
            prepared.dataset.classes.len(),
            &fp,
        )
        .map_err(|e| e.in_stage("classify"))?;
        for &i in &fold.test {
            let (label, _) = model
                .predict_checked(&instances[i].features, &fp)
                .map_err(|e| e.in_stage("classify"))?;
            truth.push(instances[i].label);
            predicted.push(label);
            predictions.push((i, instances[i].label, label));
        }
        train_ms += t2.elapsed().as_millis();
    }
    timings.insert("features".into(), feature_ms);
    timings.insert("classify".into(), train_ms);

    let cm = confusion(&truth, &predicted, prepared.dataset.classes.names())
        .map_err(|e| e.in_stage("metrics"))?;
    let metrics = MetricsSummary {
        balanced_accuracy: cm.balanced_accuracy().map_err(|e| e.in_stage("metrics"))?,
        weighted_f1: cm.weighted_f1().map_err(|e| e.in_stage("metrics"))?,
        per_class_f1: cm.per_class_f1(),
    };

    // audit over the evaluated train/test pair (pooled folds audit per fold
    // and report the worst leakage)
    let t3 = Instant::now();
    let mut audit_report: Option<AuditReport> = None;
    for fold in &folds {
        let train_refs: Vec<&LabeledInstance> = fold.train.iter().map(|&i| &skeletons[i]).collect();
        let test_refs: Vec<&LabeledInstance> = fold.test.iter().map(|&i| &skeletons[i]).collect();
        let report = AuditReport {
            leakage_fraction: audit::leakage_fraction(&train_refs, &test_refs)
                .map_err(|e| e.in_stage("audit"))?,
            near_duplicate_fraction: audit::near_duplicate_fraction(&train_refs, &test_refs)
                .map_err(|e| e.in_stage("audit"))?,
            adjacency_fraction: audit::adjacency_fraction(
                &train_refs,
                &test_refs,
                config.segmentation.size,
            )
            .map_err(|e| e.in_stage("audit"))?,
            adjacency_k: config.segmentation.size,
            violations: audit::group_integrity(&assignment, &skeletons),
            overlap_histogram: audit::overlap_histogram(&prepared.windows),
            train_size: fold.train.len(),
            test_size: fold.test.len(),
        };
        match &mut audit_report {
            Some(existing) if existing.leakage_fraction >= report.leakage_fraction => {}
            _ => audit_report = Some(report),
        }
    }
    timings.insert("audit".into(), t3.elapsed().as_millis());

    Ok(RunReport {
        config_fingerprint: config.fingerprint(),
        scheme: split.scheme.name().to_string(),
        seed: config.seed,
        feature_schema: schema.expect("at least one fold"),
        metrics,
        confusion: cm,
        audit: audit_report.expect("at least one fold"),
        assignment,
        predictions,
        timings_ms: timings,
    })
}

/// Side-by-side biased/unbiased comparison: both runs share segmentation,
/// features, classifier and seed; the gap is biased minus unbiased.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub config_fingerprint: String,
    pub biased: RunReport,
    pub unbiased: RunReport,
    pub gap_balanced_accuracy: f64,
    pub gap_weighted_f1: f64,
}

pub fn compare(config: &ExperimentConfig) -> Result<GapReport> {
    if config.splits.len() != 2 {
        return Err(Error::config(format!(
            "compare expects exactly two split specs (biased, unbiased), found {}",
            config.splits.len()
        )));
    }
    let prepared = prepare(config)?;
    let biased = run_split(config, &prepared, &config.splits[0])?;
    let unbiased = run_split(config, &prepared, &config.splits[1])?;
    let report = GapReport {
        config_fingerprint: config.fingerprint(),
        gap_balanced_accuracy: biased.metrics.balanced_accuracy
            - unbiased.metrics.balanced_accuracy,
        gap_weighted_f1: biased.metrics.weighted_f1 - unbiased.metrics.weighted_f1,
        biased,
        unbiased,
    };
    if let Some(dir) = &config.output_dir {
        persist_run(dir, &report.biased)?;
        persist_run(dir, &report.unbiased)?;
        write_json(&dir.join("gap_report.json"), &report)?;
    }
    Ok(report)
}

/// Segmentation and split only, no training: leakage, integrity and the
/// overlap histogram.
pub fn audit_only(config: &ExperimentConfig) -> Result<AuditReport> {
    if config.splits.len() != 1 {
        return Err(Error::config(format!(
            "audit expects exactly one split spec, found {}",
            config.splits.len()
        )));
    }
    let prepared = prepare(config)?;
    let skeletons = prepared.skeleton_instances();
    let split = &config.splits[0];
    let report = if split.scheme == SplitScheme::Loso {
        let assignments = loso_split(&skeletons).map_err(|e| e.in_stage("split"))?;
        let mut worst: Option<AuditReport> = None;
        for a in &assignments {
            let r = audit::audit_assignment(
                a,
                &skeletons,
                &prepared.windows,
                "train",
                "test",
                Some(config.segmentation.size),
            )
            .map_err(|e| e.in_stage("audit"))?;
            match &worst {
                Some(w) if w.leakage_fraction >= r.leakage_fraction => {}
                _ => worst = Some(r),
            }
        }
        worst.expect("at least two subjects")
    } else {
        let assignment = split
            .apply(&skeletons, config.seed)
            .map_err(|e| e.in_stage("split"))?;
        let fold = eval_split(&assignment, split.eval_fold.unwrap_or(0))?;
        let eval_assignment = FoldAssignment {
            scheme: assignment.scheme,
            seed: assignment.seed,
            partitions: vec![
                Partition {
                    name: "train".into(),
                    indices: fold.train,
                },
                Partition {
                    name: "test".into(),
                    indices: fold.test,
                },
            ],
        };
        audit::audit_assignment(
            &eval_assignment,
            &skeletons,
            &prepared.windows,
            "train",
            "test",
            Some(config.segmentation.size),
        )
        .map_err(|e| e.in_stage("audit"))?
    };
    if let Some(dir) = &config.output_dir {
        write_json(&dir.join("audit.json"), &report)?;
    }
    Ok(report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let json = serde_json::to_string_pretty(value)
        .map_err(|e| Error::invariant(format!("serialize {}: {e}", path.display())))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

fn persist_run(dir: &Path, report: &RunReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(format!("report_{}.json", report.scheme)), report)?;
    write_json(
        &dir.join(format!("assignment_{}.json", report.scheme)),
        &report.assignment,
    )?;
    let csv_path = dir.join(format!("confusion_{}.csv", report.scheme));
    std::fs::write(&csv_path, report.confusion.to_csv()).map_err(|e| Error::io(&csv_path, e))?;
    let mut pred_csv = String::from("instance,truth,predicted\n");
    for (i, t, p) in &report.predictions {
        pred_csv.push_str(&format!("{i},{t},{p}\n"));
    }
    let pred_path = dir.join(format!("predictions_{}.csv", report.scheme));
    std::fs::write(&pred_path, pred_csv).map_err(|e| Error::io(&pred_path, e))
}

/// Independent checker: recomputes the metrics of a persisted run from its
/// predictions file alone and verifies they match the report exactly.
pub fn verify_run_artifacts(dir: &Path, scheme: &str) -> Result<()> {
    let report_path = dir.join(format!("report_{scheme}.json"));
    let text = std::fs::read_to_string(&report_path).map_err(|e| Error::io(&report_path, e))?;
    let report: RunReport = serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("report parse: {e}")))?;

    let pred_path = dir.join(format!("predictions_{scheme}.csv"));
    let pred_text = std::fs::read_to_string(&pred_path).map_err(|e| Error::io(&pred_path, e))?;
    let mut truth = Vec::new();
    let mut predicted = Vec::new();
    for line in pred_text.lines().skip(1) {
        let mut parts = line.split(',');
        let _i: usize = parts.next().unwrap().parse().unwrap();
        truth.push(parts.next().unwrap().parse::<usize>().unwrap());
        predicted.push(parts.next().unwrap().parse::<usize>().unwrap());
    }
    let cm = confusion(&truth, &predicted, &report.confusion.classes)?;
    if cm.counts != report.confusion.counts {
        return Err(Error::invariant("persisted confusion matrix does not match predictions"));
    }
    let ba = cm.balanced_accuracy()?;
    let f1 = cm.weighted_f1()?;
    if ba != report.metrics.balanced_accuracy || f1 != report.metrics.weighted_f1 {
        return Err(Error::invariant("persisted metrics do not match recomputation"));
    }
    Ok(())
}
