//! Property-based checks across segmentation, splitting, auditing and the
//! serialization round trip.

use proptest::prelude::*;

use leakcheck_core::audit::leakage_fraction;
use leakcheck_core::ingest::{parse_event_log, resolve_labels, serialize_event_log, EventLogSchema};
use leakcheck_core::model::{ClassTable, LabeledInstance, SampleRow, Span};
use leakcheck_core::segment::{
    segment_samples, window_count, GroupRule, LabelRule, SegmentMode, SegmentationSpec,
};
use leakcheck_core::split::{random_shuffle_split, stratified_kfold, SplitSpec};
use leakcheck_core::synth::{generate_ambient_stream, SynthConfig};

fn rows(n: usize) -> Vec<SampleRow> {
    (0..n)
        .map(|i| SampleRow {
            index: i,
            channels: vec![i as f64],
            label: 0,
            subject_id: "s".into(),
        })
        .collect()
}

fn spec(size: usize, step: usize) -> SegmentationSpec {
    SegmentationSpec {
        mode: SegmentMode::SampleCount,
        size,
        step,
        label_rule: LabelRule::UniformActivity,
        group_rule: GroupRule::BySubject,
    }
}

/// Overlapping-window fixture: one source, contiguous strided spans.
fn strided_instances(n: usize, size: usize, step: usize) -> Vec<LabeledInstance> {
    (0..n)
        .map(|i| LabeledInstance {
            features: Vec::new(),
            label: 0,
            group_key: "g".into(),
            span: Span::new(i * step, i * step + size),
            source_id: "src".into(),
        })
        .collect()
}

fn split_leakage(instances: &[LabeledInstance], seed: u64) -> f64 {
    let assignment = random_shuffle_split(instances, &[80, 20], seed).unwrap();
    let train: Vec<&LabeledInstance> = assignment.partition("train").unwrap().indices
        .iter().map(|&i| &instances[i]).collect();
    let test: Vec<&LabeledInstance> = assignment.partition("test").unwrap().indices
        .iter().map(|&i| &instances[i]).collect();
    leakage_fraction(&train, &test).unwrap()
}

proptest! {
    #[test]
    fn window_count_matches_enumeration(n in 0usize..600, size in 1usize..80, step_frac in 1usize..80) {
        let step = step_frac.min(size);
        let expected = (0..).map(|w| w * step).take_while(|s| s + size <= n).count();
        prop_assert_eq!(window_count(n, size, step), expected);
        let windows = segment_samples(&rows(n), &spec(size, step), "src").unwrap();
        prop_assert_eq!(windows.len(), expected);
    }

    #[test]
    fn consecutive_windows_share_size_minus_step(n in 2usize..300, size in 2usize..50, step_frac in 1usize..50) {
        let step = step_frac.min(size);
        let windows = segment_samples(&rows(n), &spec(size, step), "src").unwrap();
        for pair in windows.windows(2) {
            prop_assert_eq!(leakcheck_core::model::raw_overlap(&pair[0], &pair[1]), size - step);
        }
    }

    #[test]
    // n >= 5 so the 20% side is non-empty
    fn random_split_partitions_are_disjoint_and_covering(n in 5usize..400, seed in 0u64..1000) {
        let instances = strided_instances(n, 10, 3);
        let assignment = random_shuffle_split(&instances, &[80, 20], seed).unwrap();
        prop_assert!(assignment.validate(n).is_ok());
    }

    #[test]
    fn stratified_kfold_partitions_are_disjoint_and_covering(
        n in 10usize..300, k in 2usize..6, seed in 0u64..1000
    ) {
        let mut instances = strided_instances(n, 10, 3);
        for (i, inst) in instances.iter_mut().enumerate() {
            inst.label = i % 3;
        }
        let (assignment, _) = stratified_kfold(&instances, k, seed).unwrap();
        prop_assert!(assignment.validate(n).is_ok());
        prop_assert_eq!(assignment.partitions.len(), k);
    }

    #[test]
    fn group_schemes_keep_groups_whole(n in 20usize..200, seed in 0u64..500) {
        let mut instances = strided_instances(n, 8, 8);
        for (i, inst) in instances.iter_mut().enumerate() {
            inst.group_key = format!("g{}", i % 7);
            inst.label = i % 3;
        }
        for split in &[SplitSpec::group_kfold(3), SplitSpec::stratified_group_kfold(3)] {
            let assignment = split.apply(&instances, seed).unwrap();
            prop_assert!(leakcheck_core::audit::group_integrity(&assignment, &instances).is_empty());
        }
    }

    /// Shrinking the step (more overlap) never decreases leakage under the
    /// same random split.
    #[test]
    fn leakage_is_monotone_in_overlap(seed in 0u64..200) {
        let size = 32usize;
        let n = 400usize;
        let mut last = -1.0f64;
        for step in [size, size / 2, size / 4, 1] {
            let leak = split_leakage(&strided_instances(n, size, step), seed);
            prop_assert!(leak >= last - 1e-12);
            last = leak;
        }
    }

    #[test]
    fn event_log_round_trips(seed in 0u64..200) {
        let mut config = SynthConfig::default_ambient();
        config.seed = seed;
        config.days = 1;
        config.visits_per_day = 4;
        config.mean_duration = 10;
        let mut classes = ClassTable::new();
        let events = generate_ambient_stream(&config, &mut classes).unwrap();

        let text = serialize_event_log(&events, &classes);
        let schema = EventLogSchema::default();
        let log = parse_event_log(&text, &schema).unwrap();
        prop_assert!(log.skipped.is_empty());
        let mut parsed = log.events;
        let mut classes2 = ClassTable::new();
        resolve_labels(&mut parsed, &mut classes2);

        prop_assert_eq!(parsed.len(), events.len());
        for (orig, back) in events.iter().zip(&parsed) {
            prop_assert_eq!(orig.timestamp, back.timestamp);
            prop_assert_eq!(&orig.sensor_id, &back.sensor_id);
            prop_assert_eq!(
                orig.label.map(|l| classes.name(l)),
                back.label.map(|l| classes2.name(l))
            );
        }
    }
}
