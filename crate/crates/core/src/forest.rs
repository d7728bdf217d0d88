//! From-scratch random forest (CART trees, Gini impurity, bootstrap
//! aggregation) plus a k-nearest-neighbour baseline. All tie-breaking rules
//! are fixed so training is reproducible across platforms and thread
//! schedules.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, LabeledInstance};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSubset {
    /// ceil(sqrt(F)) random slots per split, the usual forest rule.
    Sqrt,
    /// All slots at every split (degrades trees to plain CART).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub feature_subset: FeatureSubset,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 20,
            min_leaf: 2,
            bootstrap: true,
            feature_subset: FeatureSubset::Sqrt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        /// Per-class sample counts routed to this leaf during training.
        counts: Vec<u32>,
    },
}

impl TreeNode {
    /// Majority class of the leaf this feature vector routes to.
    fn vote(&self, features: &[f64]) -> ClassId {
        match self {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if features[*feature] <= *threshold {
                    left.vote(features)
                } else {
                    right.vote(features)
                }
            }
            TreeNode::Leaf { counts } => majority(counts),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

/// Arg-max with ties broken by lowest class id.
fn majority(counts: &[u32]) -> ClassId {
    let mut best = 0;
    for (c, &n) in counts.iter().enumerate() {
        if n > counts[best] {
            best = c;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format_version: u32,
    pub trees: Vec<TreeNode>,
    /// Fingerprint of the feature schema the model was trained against.
    pub schema_fingerprint: String,
    pub class_count: usize,
    pub params: ForestParams,
    pub seed: u64,
}

struct TrainView<'a> {
    features: Vec<&'a [f64]>,
    labels: Vec<ClassId>,
    n_classes: usize,
    n_features: usize,
}

fn gini(counts: &[u32], total: f64) -> f64 {
    let mut g = 1.0;
    for &c in counts {
        let p = c as f64 / total;
        g -= p * p;
    }
    g
}

/// Best (threshold, weighted-child-impurity) for one feature over the node's
/// samples, or None when no split keeps both children at min_leaf.
fn best_threshold_for_feature(
    view: &TrainView,
    indices: &[usize],
    feature: usize,
    min_leaf: usize,
) -> Option<(f64, f64)> {
    let mut pairs: Vec<(f64, ClassId)> = indices
        .iter()
        .map(|&i| (view.features[i][feature], view.labels[i]))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let n = pairs.len();
    let mut right = vec![0u32; view.n_classes];
    for &(_, label) in &pairs {
        right[label] += 1;
    }
    let mut left = vec![0u32; view.n_classes];

    let mut best: Option<(f64, f64)> = None;
    for i in 0..n - 1 {
        let (v, label) = pairs[i];
        left[label] += 1;
        right[label] -= 1;
        let next = pairs[i + 1].0;
        if v == next {
            continue;
        }
        let nl = i + 1;
        let nr = n - nl;
        if nl < min_leaf || nr < min_leaf {
            continue;
        }
        let threshold = v + (next - v) / 2.0;
        let impurity = (nl as f64 * gini(&left, nl as f64)
            + nr as f64 * gini(&right, nr as f64))
            / n as f64;
        match best {
            // tie-break lower threshold
            Some((bt, bi)) if impurity > bi || (impurity == bi && threshold >= bt) => {}
            _ => best = Some((threshold, impurity)),
        }
    }
    best
}

fn grow(
    view: &TrainView,
    indices: &[usize],
    depth: usize,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let mut counts = vec![0u32; view.n_classes];
    for &i in indices {
        counts[view.labels[i]] += 1;
    }
    let total = indices.len() as f64;
    let node_impurity = gini(&counts, total);
    let pure = node_impurity == 0.0;

    if pure || depth >= params.max_depth || indices.len() < 2 * params.min_leaf {
        return TreeNode::Leaf { counts };
    }

    let candidates: Vec<usize> = match params.feature_subset {
        FeatureSubset::All => (0..view.n_features).collect(),
        FeatureSubset::Sqrt => {
            let m = (view.n_features as f64).sqrt().ceil() as usize;
            let mut all: Vec<usize> = (0..view.n_features).collect();
            all.shuffle(rng);
            let mut chosen: Vec<usize> = all.into_iter().take(m).collect();
            chosen.sort_unstable();
            chosen
        }
    };

    // lowest feature index wins ties, so iterate in sorted order
    let mut best: Option<(usize, f64, f64)> = None;
    for &feature in &candidates {
        if let Some((threshold, impurity)) =
            best_threshold_for_feature(view, indices, feature, params.min_leaf)
        {
            match best {
                Some((_, _, bi)) if impurity >= bi => {}
                _ => best = Some((feature, threshold, impurity)),
            }
        }
    }
    let Some((feature, threshold, impurity)) = best else {
        return TreeNode::Leaf { counts };
    };
    // zero-gain splits are allowed (XOR-like data needs them); only strictly
    // worse splits stop growth
    if impurity > node_impurity {
        return TreeNode::Leaf { counts };
    }

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| view.features[i][feature] <= threshold);
    let left = grow(view, &left_idx, depth + 1, params, rng);
    let right = grow(view, &right_idx, depth + 1, params, rng);
    TreeNode::Split {
        feature,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    }
}

fn check_finite(instances: &[LabeledInstance]) -> Result<()> {
    for (i, inst) in instances.iter().enumerate() {
        if inst.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant(format!(
                "instance {i} carries a non-finite feature"
            )));
        }
    }
    Ok(())
}

/// splitmix64 finalizer, the declared per-tree seed mixing function.
pub fn mix_seed(seed: u64, tree_index: u64) -> u64 {
    let mut z = seed ^ tree_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Trains a single CART tree on the given instances (no bootstrap).
pub fn train_tree(
    instances: &[LabeledInstance],
    params: &ForestParams,
    seed: u64,
    n_classes: usize,
) -> Result<TreeNode> {
    if instances.is_empty() {
        return Err(Error::config("cannot train a tree on zero instances"));
    }
    check_finite(instances)?;
    let view = TrainView {
        features: instances.iter().map(|i| i.features.as_slice()).collect(),
        labels: instances.iter().map(|i| i.label).collect(),
        n_classes,
        n_features: instances[0].features.len(),
    };
    let indices: Vec<usize> = (0..instances.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(grow(&view, &indices, 0, params, &mut rng))
}

/// Trains the forest: each tree on a bootstrap resample, per-tree seeds
/// pre-derived with [`mix_seed`] so the result is independent of scheduling.
pub fn train_forest(
    instances: &[LabeledInstance],
    params: &ForestParams,
    seed: u64,
    n_classes: usize,
    schema_fingerprint: &str,
) -> Result<ForestModel> {
    if params.n_trees < 1 {
        return Err(Error::config("forest needs at least one tree"));
    }
    if instances.is_empty() {
        return Err(Error::config("cannot train a forest on zero instances"));
    }
    check_finite(instances)?;
    let view = TrainView {
        features: instances.iter().map(|i| i.features.as_slice()).collect(),
        labels: instances.iter().map(|i| i.label).collect(),
        n_classes,
        n_features: instances[0].features.len(),
    };
    let n = instances.len();
    let trees: Vec<TreeNode> = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(&view, &indices, 0, params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        format_version: MODEL_FORMAT_VERSION,
        trees,
        schema_fingerprint: schema_fingerprint.to_string(),
        class_count: n_classes,
        params: *params,
        seed,
    })
}

impl ForestModel {
    /// Predicted label and per-class vote shares. Errors if the features were
    /// produced under a different schema.
    pub fn predict_checked(
        &self,
        features: &[f64],
        schema_fingerprint: &str,
    ) -> Result<(ClassId, Vec<f64>)> {
        if schema_fingerprint != self.schema_fingerprint {
            return Err(Error::config(format!(
                "feature schema fingerprint {schema_fingerprint} does not match model ({})",
                self.schema_fingerprint
            )));
        }
        Ok(self.predict(features))
    }

    pub fn predict(&self, features: &[f64]) -> (ClassId, Vec<f64>) {
        let mut votes = vec![0u32; self.class_count];
        for tree in &self.trees {
            votes[tree.vote(features)] += 1;
        }
        let probs: Vec<f64> = votes
            .iter()
            .map(|&v| v as f64 / self.trees.len() as f64)
            .collect();
        (majority(&votes), probs)
    }

    /// Batch prediction, parallel over instances.
    pub fn predict_batch(&self, batch: &[&[f64]]) -> Vec<ClassId> {
        batch.par_iter().map(|f| self.predict(f).0).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::invariant(format!("model serialize: {e}")))
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let model: ForestModel = serde_json::from_str(json)
            .map_err(|e| Error::format(format!("model parse: {e}")))?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported model format version {}",
                model.format_version
            )));
        }
        Ok(model)
    }
}

/// Z-score normalization parameters, fit on training data only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalizer {
    means: Vec<f64>,
    stds: Vec<f64>,
}

impl Normalizer {
    pub fn fit(train: &[&LabeledInstance]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::config("cannot fit a normalizer on zero instances"));
        }
        let f = train[0].features.len();
        let n = train.len() as f64;
        let mut means = vec![0.0; f];
        for inst in train {
            for (m, v) in means.iter_mut().zip(&inst.features) {
                *m += v;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; f];
        for inst in train {
            for (s, (v, m)) in stds.iter_mut().zip(inst.features.iter().zip(&means)) {
                *s += (v - m).powi(2);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
            if *s == 0.0 {
                *s = 1.0;
            }
        }
        Ok(Normalizer { means, stds })
    }

    pub fn apply(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Majority label among the k nearest training instances by Euclidean
/// distance on z-scored features. Distance ties break by lower training
/// index; vote ties by lower class id.
pub fn knn_predict(
    train: &[&LabeledInstance],
    query: &[f64],
    k: usize,
    normalizer: &Normalizer,
) -> Result<ClassId> {
    if train.is_empty() {
        return Err(Error::config("knn needs a non-empty training set"));
    }
    if k < 1 || k > train.len() {
        return Err(Error::config(format!(
            "k={k} out of range for {} training instances",
            train.len()
        )));
    }
    let q = normalizer.apply(query);
    let mut dists: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            let z = normalizer.apply(&inst.features);
            let d: f64 = z.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
            (d, i)
        })
        .collect();
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let n_classes = train.iter().map(|i| i.label).max().unwrap() + 1;
    let mut votes = vec![0u32; n_classes];
    for &(_, i) in dists.iter().take(k) {
        votes[train[i].label] += 1;
    }
    Ok(majority(&votes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Span;

    fn inst(features: Vec<f64>, label: ClassId) -> LabeledInstance {
        LabeledInstance {
            features,
            label,
            group_key: "g".into(),
            span: Span::new(0, 1),
            source_id: "s".into(),
        }
    }

    fn train_accuracy(tree: &TreeNode, data: &[LabeledInstance]) -> f64 {
        let hits = data
            .iter()
            .filter(|i| tree.vote(&i.features) == i.label)
            .count();
        hits as f64 / data.len() as f64
    }

    #[test]
    fn single_class_input_is_one_leaf() {
        let data: Vec<_> = (0..10).map(|i| inst(vec![i as f64], 3)).collect();
        let tree = train_tree(&data, &ForestParams::default(), 0, 4).unwrap();
        assert_eq!(tree.depth(), 0);
        assert!(matches!(tree, TreeNode::Leaf { .. }));
    }

    #[test]
    fn one_dimensional_separable_data_splits_once() {
        let mut data = Vec::new();
        for i in 1..=10 {
            data.push(inst(vec![-(i as f64)], 0));
            data.push(inst(vec![i as f64], 1));
        }
        let params = ForestParams {
            feature_subset: FeatureSubset::All,
            min_leaf: 1,
            ..Default::default()
        };
        let tree = train_tree(&data, &params, 0, 2).unwrap();
        assert_eq!(tree.depth(), 1);
        assert_eq!(train_accuracy(&tree, &data), 1.0);
    }

    #[test]
    fn xor_solved_at_depth_two() {
        let data = vec![
            inst(vec![0.0, 0.0], 0),
            inst(vec![0.0, 1.0], 1),
            inst(vec![1.0, 0.0], 1),
            inst(vec![1.0, 1.0], 0),
        ];
        let params = ForestParams {
            feature_subset: FeatureSubset::All,
            min_leaf: 1,
            max_depth: 2,
            ..Default::default()
        };
        let tree = train_tree(&data, &params, 0, 2).unwrap();
        assert_eq!(train_accuracy(&tree, &data), 1.0);
        assert!(tree.depth() <= 2);
    }

    #[test]
    fn non_finite_feature_is_rejected() {
        let data = vec![inst(vec![f64::NAN], 0), inst(vec![1.0], 1)];
        assert!(train_tree(&data, &ForestParams::default(), 0, 2).is_err());
    }

    fn blobs(seed: u64, n_per: usize) -> Vec<LabeledInstance> {
        // two well-separated gaussian blobs in 4-d
        use rand_distr::{Distribution, Normal};
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut data = Vec::new();
        for label in 0..2usize {
            let center = if label == 0 { -2.0 } else { 2.0 };
            for _ in 0..n_per {
                let f: Vec<f64> = (0..4).map(|_| center + noise.sample(&mut rng)).collect();
                data.push(inst(f, label));
            }
        }
        data
    }

    #[test]
    fn single_unbootstrapped_tree_equals_train_tree() {
        let data = blobs(1, 30);
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            ..Default::default()
        };
        let forest = train_forest(&data, &params, 42, 2, "fp").unwrap();
        let tree = train_tree(&data, &params, mix_seed(42, 0), 2).unwrap();
        assert_eq!(forest.trees[0], tree);
    }

    #[test]
    fn same_seed_identical_model_bytes() {
        let data = blobs(2, 40);
        let params = ForestParams {
            n_trees: 20,
            ..Default::default()
        };
        let a = train_forest(&data, &params, 7, 2, "fp").unwrap();
        let b = train_forest(&data, &params, 7, 2, "fp").unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        let c = train_forest(&data, &params, 8, 2, "fp").unwrap();
        assert_ne!(a.to_json().unwrap(), c.to_json().unwrap());
    }

    #[test]
    fn separable_blobs_reach_095_test_accuracy() {
        let train = blobs(3, 100);
        let test = blobs(4, 50);
        let params = ForestParams {
            n_trees: 50,
            ..Default::default()
        };
        let model = train_forest(&train, &params, 5, 2, "fp").unwrap();
        let hits = test
            .iter()
            .filter(|i| model.predict(&i.features).0 == i.label)
            .count();
        assert!(hits as f64 / test.len() as f64 >= 0.95);
    }

    #[test]
    fn probabilities_are_a_distribution() {
        let data = blobs(6, 50);
        let model = train_forest(&data, &ForestParams::default(), 1, 2, "fp").unwrap();
        for i in &data {
            let (_, probs) = model.predict(&i.features);
            assert!(probs.iter().all(|&p| p >= 0.0));
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unanimous_vote_gives_probability_one() {
        let data: Vec<_> = (0..20).map(|i| inst(vec![i as f64], 2)).collect();
        let model = train_forest(&data, &ForestParams::default(), 0, 3, "fp").unwrap();
        let (label, probs) = model.predict(&[5.0]);
        assert_eq!(label, 2);
        assert_eq!(probs[2], 1.0);
    }

    #[test]
    fn vote_ties_break_to_lowest_class() {
        assert_eq!(majority(&[0, 5, 0, 5]), 1);
        assert_eq!(majority(&[3, 3]), 0);
    }

    #[test]
    fn schema_fingerprint_mismatch_is_an_error() {
        let data = blobs(7, 20);
        let model = train_forest(&data, &ForestParams::default(), 0, 2, "fp-a").unwrap();
        assert!(model.predict_checked(&data[0].features, "fp-b").is_err());
        assert!(model.predict_checked(&data[0].features, "fp-a").is_ok());
    }

    #[test]
    fn model_json_round_trip() {
        let data = blobs(8, 20);
        let params = ForestParams {
            n_trees: 5,
            ..Default::default()
        };
        let model = train_forest(&data, &params, 3, 2, "fp").unwrap();
        let back = ForestModel::from_json(&model.to_json().unwrap()).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn knn_exact_match_returns_its_label() {
        let data = blobs(9, 20);
        let refs: Vec<&LabeledInstance> = data.iter().collect();
        let norm = Normalizer::fit(&refs).unwrap();
        let got = knn_predict(&refs, &data[7].features, 1, &norm).unwrap();
        assert_eq!(got, data[7].label);
    }

    #[test]
    fn knn_with_k_equals_n_returns_majority() {
        let mut data = blobs(10, 10);
        data.push(inst(vec![0.0; 4], 0)); // class 0 now majority
        let refs: Vec<&LabeledInstance> = data.iter().collect();
        let norm = Normalizer::fit(&refs).unwrap();
        let got = knn_predict(&refs, &[100.0, 100.0, 100.0, 100.0], refs.len(), &norm).unwrap();
        assert_eq!(got, 0);
    }

    #[test]
    fn knn_on_duplicated_test_windows_is_perfect() {
        // the leakage mechanism made literal: test points present in training
        let train = blobs(11, 30);
        let refs: Vec<&LabeledInstance> = train.iter().collect();
        let norm = Normalizer::fit(&refs).unwrap();
        let hits = train
            .iter()
            .filter(|t| knn_predict(&refs, &t.features, 1, &norm).unwrap() == t.label)
            .count();
        assert_eq!(hits, train.len());
    }

    #[test]
    fn knn_rejects_bad_k_and_empty_train() {
        let data = blobs(12, 5);
        let refs: Vec<&LabeledInstance> = data.iter().collect();
        let norm = Normalizer::fit(&refs).unwrap();
        assert!(knn_predict(&refs, &data[0].features, 0, &norm).is_err());
        assert!(knn_predict(&refs, &data[0].features, 11, &norm).is_err());
        assert!(knn_predict(&[], &data[0].features, 1, &norm).is_err());
    }
}
