//! Scratch probe: prints biased/unbiased balanced accuracy and the gap per
//! seed for the default synthetic configurations.

use std::time::Instant;

use leakcheck_core::forest::ForestParams;
use leakcheck_core::pipeline::{compare, DataSource, ExperimentConfig, FeatureSet};
use leakcheck_core::segment::{GroupRule, LabelRule, SegmentMode, SegmentationSpec};
use leakcheck_core::split::SplitSpec;
use leakcheck_core::synth::SynthConfig;

fn ambient(seed: u64) -> ExperimentConfig {
    let mut synth = SynthConfig::default_ambient();
    synth.seed = seed;
    ExperimentConfig {
        source: DataSource::SynthAmbient(synth),
        segmentation: SegmentationSpec {
            mode: SegmentMode::EventCount,
            size: 30,
            step: 1,
            label_rule: LabelRule::LastEvent,
            group_rule: GroupRule::ByDate,
        },
        feature_set: FeatureSet::Milan,
        splits: vec![SplitSpec::random(vec![80, 20]), SplitSpec::stratified_group_kfold(5)],
        classifier: ForestParams::default(),
        output_dir: None,
        seed,
    }
}

fn body(seed: u64) -> ExperimentConfig {
    let mut synth = SynthConfig::default_body();
    synth.seed = seed;
    ExperimentConfig {
        source: DataSource::SynthBody(synth),
        segmentation: SegmentationSpec {
            mode: SegmentMode::SampleCount,
            size: 128,
            step: 64,
            label_rule: LabelRule::UniformActivity,
            group_rule: GroupRule::BySubject,
        },
        feature_set: FeatureSet::ImuStats,
        splits: vec![SplitSpec::random(vec![80, 20]), SplitSpec::loso()],
        classifier: ForestParams::default(),
        output_dir: None,
        seed,
    }
}

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "ambient".into());
    let seeds: Vec<u64> = std::iter::once(42).chain(1..=10).collect();
    for seed in seeds {
        let config = if mode == "ambient" { ambient(seed) } else { body(seed) };
        let t = Instant::now();
        match compare(&config) {
            Ok(gap) => println!(
                "{mode} seed {seed:2}: biased {:.4} unbiased {:.4} gap {:+.4} leak {:.3} ({:.1}s)",
                gap.biased.metrics.balanced_accuracy,
                gap.unbiased.metrics.balanced_accuracy,
                gap.gap_balanced_accuracy,
                gap.biased.audit.leakage_fraction,
                t.elapsed().as_secs_f64()
            ),
            Err(e) => println!("{mode} seed {seed}: ERROR {e}"),
        }
    }
}
