use leakcheck_core::forest::ForestParams;
use leakcheck_core::pipeline::{DataSource, ExperimentConfig, FeatureSet};
use leakcheck_core::segment::{GroupRule, LabelRule, SegmentMode, SegmentationSpec};
use leakcheck_core::split::SplitSpec;
use leakcheck_core::synth::SynthConfig;

fn main() {
    let config = ExperimentConfig {
        source: DataSource::SynthAmbient(SynthConfig::default_ambient()),
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
        seed: 42,
    };
    println!("{}", serde_json::to_string_pretty(&config).unwrap());
}
