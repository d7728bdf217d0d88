//! Train/test partitioning: the biased random-shuffle baseline and the
//! group-constrained schemes that prevent contamination.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassId, FoldAssignment, LabeledInstance, Partition, SplitScheme};

/// Partition names for ratio-based splits, in ratio order.
fn ratio_names(count: usize) -> Vec<&'static str> {
    match count {
        2 => vec!["train", "test"],
        3 => vec!["train", "validation", "test"],
        _ => vec![],
    }
}

/// Declarative description of a split, as it appears in experiment configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitSpec {
    pub scheme: SplitScheme,
    /// Percentages summing to 100, e.g. [80, 20] or [60, 20, 20].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratios: Option<Vec<u32>>,
    /// Fold count for k-fold schemes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Group -> partition name, for explicit holdouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignments: Option<HashMap<String, String>>,
    /// Which fold serves as the test set when evaluating a k-fold scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_fold: Option<usize>,
}

impl SplitSpec {
    pub fn random(ratios: Vec<u32>) -> Self {
        SplitSpec {
            scheme: SplitScheme::RandomShuffle,
            ratios: Some(ratios),
            k: None,
            assignments: None,
            eval_fold: None,
        }
    }

    pub fn group_kfold(k: usize) -> Self {
        SplitSpec {
            scheme: SplitScheme::GroupKfold,
            ratios: None,
            k: Some(k),
            assignments: None,
            eval_fold: None,
        }
    }

    pub fn stratified_group_kfold(k: usize) -> Self {
        SplitSpec {
            scheme: SplitScheme::StratifiedGroupKfold,
            ratios: None,
            k: Some(k),
            assignments: None,
            eval_fold: None,
        }
    }

    pub fn loso() -> Self {
        SplitSpec {
            scheme: SplitScheme::Loso,
            ratios: None,
            k: None,
            assignments: None,
            eval_fold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(ratios) = &self.ratios {
            if ratios.iter().sum::<u32>() != 100 {
                return Err(Error::config("split ratios must sum to 100"));
            }
            if !(2..=3).contains(&ratios.len()) {
                return Err(Error::config("split ratios must have 2 or 3 parts"));
            }
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::config("fold count k must be >= 2"));
            }
        }
        Ok(())
    }

    /// Produces the fold assignment for these instances.
    pub fn apply(&self, instances: &[LabeledInstance], seed: u64) -> Result<FoldAssignment> {
        self.validate()?;
        match self.scheme {
            SplitScheme::RandomShuffle => {
                let ratios = self
                    .ratios
                    .as_ref()
                    .ok_or_else(|| Error::config("random-shuffle needs ratios"))?;
                random_shuffle_split(instances, ratios, seed)
            }
            SplitScheme::StratifiedKfold => {
                let k = self.k.ok_or_else(|| Error::config("stratified-kfold needs k"))?;
                let (a, _warnings) = stratified_kfold(instances, k, seed)?;
                Ok(a)
            }
            SplitScheme::GroupKfold => {
                let k = self.k.ok_or_else(|| Error::config("group-kfold needs k"))?;
                group_kfold(instances, k)
            }
            SplitScheme::StratifiedGroupKfold => {
                let k = self
                    .k
                    .ok_or_else(|| Error::config("stratified-group-kfold needs k"))?;
                stratified_group_kfold(instances, k, seed)
            }
            SplitScheme::Loso => Err(Error::config(
                "loso produces one assignment per subject; use loso_split",
            )),
            SplitScheme::ExplicitHoldout => {
                let map = self
                    .assignments
                    .as_ref()
                    .ok_or_else(|| Error::config("explicit-holdout needs assignments"))?;
                explicit_holdout(instances, map)
            }
        }
    }
}

/// Shuffles uniformly by seed and cuts at the ratio boundaries. This is the
/// biased baseline by construction: overlapping neighbors land on both sides
/// of the cut.
pub fn random_shuffle_split(
    instances: &[LabeledInstance],
    ratios: &[u32],
    seed: u64,
) -> Result<FoldAssignment> {
    let n = instances.len();
    if n == 0 {
        return Err(Error::config("cannot split an empty instance set"));
    }
    if ratios.iter().sum::<u32>() != 100 {
        return Err(Error::config("split ratios must sum to 100"));
    }
    let names = ratio_names(ratios.len());
    if names.is_empty() {
        return Err(Error::config("split ratios must have 2 or 3 parts"));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    // floor sizes for every non-train partition; the remainder goes to train
    let mut sizes: Vec<usize> = ratios.iter().map(|&r| n * r as usize / 100).collect();
    sizes[0] = n - sizes[1..].iter().sum::<usize>();
    if sizes.iter().any(|&s| s == 0) {
        return Err(Error::config(format!(
            "ratio cut over {n} instances produces an empty partition"
        )));
    }

    let mut partitions = Vec::new();
    let mut cursor = 0;
    for (name, &size) in names.iter().zip(&sizes) {
        let mut indices: Vec<usize> = order[cursor..cursor + size].to_vec();
        indices.sort_unstable();
        partitions.push(Partition {
            name: name.to_string(),
            indices,
        });
        cursor += size;
    }
    Ok(FoldAssignment {
        scheme: SplitScheme::RandomShuffle,
        seed,
        partitions,
    })
}

/// k folds with per-class counts differing by at most one across folds.
/// Classes with fewer than k members trigger a warning and land in as many
/// distinct folds as they have members.
pub fn stratified_kfold(
    instances: &[LabeledInstance],
    k: usize,
    seed: u64,
) -> Result<(FoldAssignment, Vec<String>)> {
    let n = instances.len();
    if k > n {
        return Err(Error::config(format!("k={k} exceeds instance count {n}")));
    }
    if k < 2 {
        return Err(Error::config("fold count k must be >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        by_class.entry(inst.label).or_default().push(i);
    }

    let mut warnings = Vec::new();
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut next_fold = 0usize;
    for (class, mut members) in by_class {
        if members.len() < k {
            warnings.push(format!(
                "class {class} has {} members, fewer than k={k}",
                members.len()
            ));
        }
        members.shuffle(&mut rng);
        // deal round-robin, continuing from where the previous class stopped
        // so small classes spread instead of piling into fold 0
        for idx in members {
            folds[next_fold].push(idx);
            next_fold = (next_fold + 1) % k;
        }
    }

    let partitions = folds
        .into_iter()
        .enumerate()
        .map(|(i, mut indices)| {
            indices.sort_unstable();
            Partition {
                name: format!("fold{i}"),
                indices,
            }
        })
        .collect();
    Ok((
        FoldAssignment {
            scheme: SplitScheme::StratifiedKfold,
            seed,
            partitions,
        },
        warnings,
    ))
}

fn groups_of(instances: &[LabeledInstance]) -> BTreeMap<&str, Vec<usize>> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        groups.entry(inst.group_key.as_str()).or_default().push(i);
    }
    groups
}

/// Each group lands wholly in one fold; groups are placed largest-first into
/// the currently smallest fold. Deterministic: ties break by group-key order.
pub fn group_kfold(instances: &[LabeledInstance], k: usize) -> Result<FoldAssignment> {
    let groups = groups_of(instances);
    if groups.len() < k {
        return Err(Error::config(format!(
            "{} groups, fewer than k={k} folds",
            groups.len()
        )));
    }
    // sort by descending size, then lexicographic key
    let mut ordered: Vec<(&str, &Vec<usize>)> = groups.iter().map(|(k, v)| (*k, v)).collect();
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then(a.0.cmp(b.0)));

    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (_, members) in ordered {
        let target = (0..k).min_by_key(|&f| (folds[f].len(), f)).unwrap();
        folds[target].extend(members);
    }
    let partitions = folds
        .into_iter()
        .enumerate()
        .map(|(i, mut indices)| {
            indices.sort_unstable();
            Partition {
                name: format!("fold{i}"),
                indices,
            }
        })
        .collect();
    Ok(FoldAssignment {
        scheme: SplitScheme::GroupKfold,
        seed: 0,
        partitions,
    })
}

/// Group-disjoint folds with best-effort class stratification. Groups are
/// placed in descending size order (seed-keyed shuffle among equal sizes)
/// into the fold minimizing the squared deviation of its class counts from
/// the ideal 1/k share of every class. Group-disjointness is the hard
/// guarantee; stratification is best-effort.
pub fn stratified_group_kfold(
    instances: &[LabeledInstance],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    let groups = groups_of(instances);
    if groups.len() < k {
        return Err(Error::config(format!(
            "{} groups, fewer than k={k} folds",
            groups.len()
        )));
    }
    let n_classes = instances.iter().map(|i| i.label).max().unwrap_or(0) + 1;
    let mut global = vec![0f64; n_classes];
    for inst in instances {
        global[inst.label] += 1.0;
    }

    let mut ordered: Vec<(&str, Vec<usize>)> =
        groups.into_iter().map(|(k, v)| (k, v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ordered.shuffle(&mut rng);
    ordered.sort_by(|a, b| b.1.len().cmp(&a.1.len()));

    let mut fold_counts = vec![vec![0f64; n_classes]; k];
    let mut fold_sizes = vec![0usize; k];
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];

    for (_, members) in &ordered {
        let mut gcounts = vec![0f64; n_classes];
        for &i in members {
            gcounts[instances[i].label] += 1.0;
        }
        let mut best = 0usize;
        let mut best_cost = f64::INFINITY;
        for f in 0..k {
            let cost: f64 = (0..n_classes)
                .map(|c| {
                    let have = fold_counts[f][c] + gcounts[c];
                    let ideal = global[c] / k as f64;
                    (have - ideal).powi(2)
                })
                .sum();
            // tie-break: emptier fold, then lower index
            if cost < best_cost - 1e-9
                || ((cost - best_cost).abs() <= 1e-9 && fold_sizes[f] < fold_sizes[best])
            {
                best = f;
                best_cost = cost;
            }
        }
        for c in 0..n_classes {
            fold_counts[best][c] += gcounts[c];
        }
        fold_sizes[best] += members.len();
        folds[best].extend(members);
    }

    let partitions = folds
        .into_iter()
        .enumerate()
        .map(|(i, mut indices)| {
            indices.sort_unstable();
            Partition {
                name: format!("fold{i}"),
                indices,
            }
        })
        .collect();
    Ok(FoldAssignment {
        scheme: SplitScheme::StratifiedGroupKfold,
        seed,
        partitions,
    })
}

/// One assignment per subject: that subject tests, everyone else trains.
pub fn loso_split(instances: &[LabeledInstance]) -> Result<Vec<FoldAssignment>> {
    let groups = groups_of(instances);
    if groups.len() < 2 {
        return Err(Error::config(
            "leave-one-subject-out needs at least 2 subjects; with a single \
             subject, group by collection date instead",
        ));
    }
    let mut out = Vec::new();
    for subject in groups.keys() {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            if inst.group_key == *subject {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        out.push(FoldAssignment {
            scheme: SplitScheme::Loso,
            seed: 0,
            partitions: vec![
                Partition {
                    name: "train".to_string(),
                    indices: train,
                },
                Partition {
                    name: "test".to_string(),
                    indices: test,
                },
            ],
        });
    }
    Ok(out)
}

/// Partitions exactly as mapped; unmapped groups default to train.
pub fn explicit_holdout(
    instances: &[LabeledInstance],
    map: &HashMap<String, String>,
) -> Result<FoldAssignment> {
    let groups = groups_of(instances);
    for mapped in map.keys() {
        if !groups.contains_key(mapped.as_str()) {
            return Err(Error::config(format!(
                "mapped group '{mapped}' absent from the data"
            )));
        }
    }
    let mut partitions: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    partitions.insert("train", Vec::new());
    for (i, inst) in instances.iter().enumerate() {
        let part = map
            .get(&inst.group_key)
            .map(|p| p.as_str())
            .unwrap_or("train");
        partitions.entry(part).or_default().push(i);
    }
    Ok(FoldAssignment {
        scheme: SplitScheme::ExplicitHoldout,
        seed: 0,
        partitions: partitions
            .into_iter()
            .map(|(name, indices)| Partition {
                name: name.to_string(),
                indices,
            })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Span;

    pub(crate) fn inst(label: ClassId, group: &str, idx: usize) -> LabeledInstance {
        LabeledInstance {
            features: vec![idx as f64],
            label,
            group_key: group.to_string(),
            span: Span::new(idx, idx + 1),
            source_id: group.to_string(),
        }
    }

    fn uniform(n: usize) -> Vec<LabeledInstance> {
        (0..n).map(|i| inst(0, &format!("g{i}"), i)).collect()
    }

    #[test]
    fn eighty_twenty_sizes() {
        let a = random_shuffle_split(&uniform(10), &[80, 20], 7).unwrap();
        assert_eq!(a.partition("train").unwrap().indices.len(), 8);
        assert_eq!(a.partition("test").unwrap().indices.len(), 2);
        a.validate(10).unwrap();
    }

    #[test]
    fn same_seed_same_assignment() {
        let data = uniform(37);
        let a = random_shuffle_split(&data, &[80, 20], 5).unwrap();
        let b = random_shuffle_split(&data, &[80, 20], 5).unwrap();
        assert_eq!(a, b);
        let c = random_shuffle_split(&data, &[80, 20], 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn remainder_goes_to_train() {
        let a = random_shuffle_split(&uniform(5), &[60, 20, 20], 1).unwrap();
        assert_eq!(a.partition("train").unwrap().indices.len(), 3);
        assert_eq!(a.partition("validation").unwrap().indices.len(), 1);
        assert_eq!(a.partition("test").unwrap().indices.len(), 1);
    }

    #[test]
    fn empty_partition_is_an_error() {
        assert!(random_shuffle_split(&uniform(3), &[99, 1], 0).is_err());
    }

    fn two_class(n_per: usize) -> Vec<LabeledInstance> {
        let mut v = Vec::new();
        for i in 0..n_per {
            v.push(inst(0, &format!("a{i}"), i));
        }
        for i in 0..n_per {
            v.push(inst(1, &format!("b{i}"), n_per + i));
        }
        v
    }

    #[test]
    fn stratified_kfold_balances_classes() {
        let data = two_class(10);
        let (a, warnings) = stratified_kfold(&data, 5, 3).unwrap();
        assert!(warnings.is_empty());
        for part in &a.partitions {
            let zeros = part.indices.iter().filter(|&&i| data[i].label == 0).count();
            let ones = part.indices.iter().filter(|&&i| data[i].label == 1).count();
            assert_eq!(zeros, 2);
            assert_eq!(ones, 2);
        }
        a.validate(20).unwrap();
    }

    #[test]
    fn stratified_kfold_k_equals_n_is_leave_one_out() {
        let data: Vec<LabeledInstance> = (0..6).map(|i| inst(i, "g", i)).collect();
        let (a, _) = stratified_kfold(&data, 6, 0).unwrap();
        assert!(a.partitions.iter().all(|p| p.indices.len() == 1));
    }

    #[test]
    fn stratified_kfold_small_class_spreads_with_warning() {
        let mut data = two_class(10);
        for i in 0..3 {
            data.push(inst(2, &format!("c{i}"), 20 + i));
        }
        let (a, warnings) = stratified_kfold(&data, 5, 11).unwrap();
        assert_eq!(warnings.len(), 1);
        let folds_with_c: usize = a
            .partitions
            .iter()
            .filter(|p| p.indices.iter().any(|&i| data[i].label == 2))
            .count();
        assert_eq!(folds_with_c, 3);
    }

    #[test]
    fn stratified_kfold_k_over_n_is_an_error() {
        assert!(stratified_kfold(&uniform(3), 5, 0).is_err());
    }

    fn grouped(sizes: &[(&str, usize)]) -> Vec<LabeledInstance> {
        let mut v = Vec::new();
        for (g, n) in sizes {
            for _ in 0..*n {
                let idx = v.len();
                v.push(inst(0, g, idx));
            }
        }
        v
    }

    #[test]
    fn group_kfold_greedy_balance() {
        // greedy trace: 5 -> fold0, 3 -> fold1, 2 -> fold1
        let data = grouped(&[("a", 5), ("b", 3), ("c", 2)]);
        let a = group_kfold(&data, 2).unwrap();
        let sizes: Vec<usize> = a.partitions.iter().map(|p| p.indices.len()).collect();
        assert_eq!(sizes, vec![5, 5]);
        let fold_of = |g: &str| {
            a.partitions
                .iter()
                .position(|p| p.indices.iter().any(|&i| data[i].group_key == g))
                .unwrap()
        };
        assert_eq!(fold_of("a"), 0);
        assert_eq!(fold_of("b"), 1);
        assert_eq!(fold_of("c"), 1);
    }

    #[test]
    fn group_kfold_one_group_per_fold() {
        let data = grouped(&[("a", 2), ("b", 2), ("c", 2)]);
        let a = group_kfold(&data, 3).unwrap();
        assert!(a.partitions.iter().all(|p| p.indices.len() == 2));
    }

    #[test]
    fn group_kfold_no_group_in_two_folds() {
        let data = grouped(&[("a", 4), ("b", 3), ("c", 5), ("d", 1), ("e", 2)]);
        let a = group_kfold(&data, 3).unwrap();
        for g in ["a", "b", "c", "d", "e"] {
            let folds = a
                .partitions
                .iter()
                .filter(|p| p.indices.iter().any(|&i| data[i].group_key == g))
                .count();
            assert_eq!(folds, 1, "group {g} split across folds");
        }
    }

    #[test]
    fn group_kfold_too_few_groups() {
        assert!(group_kfold(&grouped(&[("a", 5)]), 2).is_err());
    }

    #[test]
    fn stratified_group_kfold_exact_when_possible() {
        // two groups, each half class 0 half class 1
        let mut data = Vec::new();
        for g in ["a", "b"] {
            for i in 0..4 {
                let idx = data.len();
                data.push(inst(if i < 2 { 0 } else { 1 }, g, idx));
            }
        }
        let a = stratified_group_kfold(&data, 2, 0).unwrap();
        for p in &a.partitions {
            let zeros = p.indices.iter().filter(|&&i| data[i].label == 0).count();
            assert_eq!(zeros, 2);
            assert_eq!(p.indices.len(), 4);
        }
    }

    #[test]
    fn stratified_group_kfold_pairs_pure_groups() {
        // exhaustive comparison: the only assignment with zero deviation puts
        // one pure-A group and one pure-B group in each fold
        for seed in 0..8 {
            let mut data = Vec::new();
            for (g, label) in [("a1", 0), ("a2", 0), ("b1", 1), ("b2", 1)] {
                for _ in 0..4 {
                    let idx = data.len();
                    data.push(inst(label, g, idx));
                }
            }
            let a = stratified_group_kfold(&data, 2, seed).unwrap();
            for p in &a.partitions {
                let zeros = p.indices.iter().filter(|&&i| data[i].label == 0).count();
                assert_eq!(zeros, 4, "seed {seed}");
                assert_eq!(p.indices.len(), 8);
            }
        }
    }

    #[test]
    fn stratified_group_kfold_disjointness_is_hard() {
        // stratification cannot hold here (all of class 1 in one group), but
        // group-disjointness must
        let data = grouped(&[("a", 6), ("b", 6), ("c", 6)]);
        let mut data = data;
        for i in 0..6 {
            data[i].label = 1;
        }
        let a = stratified_group_kfold(&data, 3, 9).unwrap();
        a.validate(18).unwrap();
        for g in ["a", "b", "c"] {
            let folds = a
                .partitions
                .iter()
                .filter(|p| p.indices.iter().any(|&i| data[i].group_key == g))
                .count();
            assert_eq!(folds, 1);
        }
    }

    #[test]
    fn loso_one_assignment_per_subject() {
        let data = grouped(&[("s1", 3), ("s2", 4), ("s3", 2)]);
        let assignments = loso_split(&data).unwrap();
        assert_eq!(assignments.len(), 3);
        let mut all_test: Vec<usize> = assignments
            .iter()
            .flat_map(|a| a.partition("test").unwrap().indices.clone())
            .collect();
        all_test.sort_unstable();
        assert_eq!(all_test, (0..9).collect::<Vec<_>>());
        for a in &assignments {
            let test = a.partition("test").unwrap();
            let subjects: std::collections::HashSet<&str> = test
                .indices
                .iter()
                .map(|&i| data[i].group_key.as_str())
                .collect();
            assert_eq!(subjects.len(), 1);
        }
    }

    #[test]
    fn loso_single_subject_is_an_error() {
        let err = loso_split(&grouped(&[("s1", 5)])).unwrap_err();
        assert!(err.to_string().contains("date"));
    }

    #[test]
    fn explicit_holdout_follows_the_map() {
        let data = grouped(&[("101", 2), ("103", 2), ("105", 2), ("107", 2), ("108", 2)]);
        let map: HashMap<String, String> = [
            ("101", "validation"),
            ("107", "validation"),
            ("103", "test"),
            ("105", "test"),
        ]
        .into_iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
        let a = explicit_holdout(&data, &map).unwrap();
        assert_eq!(a.partition("validation").unwrap().indices.len(), 4);
        assert_eq!(a.partition("test").unwrap().indices.len(), 4);
        assert_eq!(a.partition("train").unwrap().indices.len(), 2);
    }

    #[test]
    fn explicit_holdout_missing_group_is_an_error() {
        let data = grouped(&[("s1", 2), ("s2", 2)]);
        let map: HashMap<String, String> =
            [("s9".to_string(), "test".to_string())].into_iter().collect();
        assert!(explicit_holdout(&data, &map).is_err());
    }

    #[test]
    fn explicit_holdout_empty_map_trains_everything() {
        let data = grouped(&[("s1", 2), ("s2", 2)]);
        let a = explicit_holdout(&data, &HashMap::new()).unwrap();
        assert_eq!(a.partition("train").unwrap().indices.len(), 4);
    }
}
