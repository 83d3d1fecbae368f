//! Stratified k-fold cross-validation and plain holdout evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::fingerprint::Label;
use crate::hash;

use super::{Confusion, EvalReport, Forest, ForestConfig, Protocol};

/// Splits row indices into `k` folds, stratified by label: each class is
/// shuffled under the seed and dealt round-robin, so per-fold class counts
/// differ by at most one from an even split.
pub fn stratified_folds(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    for class in [Label::Malware, Label::Goodware] {
        let mut members: Vec<usize> = matrix
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < k {
            return Err(Error::TooFewSamples(format!(
                "class {class} has {} rows, fewer than k = {k}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (j, row) in members.into_iter().enumerate() {
            folds[j % k].push(row);
        }
    }
    Ok(folds)
}

/// Runs stratified k-fold cross-validation and pools the per-fold confusion
/// matrices into one report.
pub fn kfold_evaluate(
    matrix: &FeatureMatrix,
    k: usize,
    config: &ForestConfig,
    seed: u64,
) -> Result<EvalReport> {
    let folds = stratified_folds(matrix, k, seed)?;
    let confusions: Vec<Result<Confusion>> = folds
        .par_iter()
        .enumerate()
        .map(|(fold_idx, test_rows)| {
            let in_test: Vec<bool> = {
                let mut mask = vec![false; matrix.rows.len()];
                for &r in test_rows {
                    mask[r] = true;
                }
                mask
            };
            let train = FeatureMatrix {
                feature_names: matrix.feature_names.clone(),
                rows: matrix
                    .rows
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !in_test[*i])
                    .map(|(_, r)| r.clone())
                    .collect(),
            };
            // Per-fold stream so parallel fold evaluation stays reproducible.
            let fold_config = config
                .with_seed(hash::hash64(config.seed, &(fold_idx as u64).to_le_bytes()));
            let forest = Forest::train(&train, &fold_config)?;
            let mut confusion = Confusion::default();
            for &r in test_rows {
                let row = &matrix.rows[r];
                confusion.record(row.label, forest.predict(row));
            }
            Ok(confusion)
        })
        .collect();

    let mut pooled = Confusion::default();
    for c in confusions {
        pooled.add(c?);
    }
    Ok(EvalReport::new(Protocol::KFold { k }, seed, pooled))
}

/// Trains on one matrix, evaluates on another.
pub fn holdout_evaluate(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    config: &ForestConfig,
    train_ratio: f64,
    seed: u64,
) -> Result<EvalReport> {
    let forest = Forest::train(train, config)?;
    let mut confusion = Confusion::default();
    for row in &test.rows {
        confusion.record(row.label, forest.predict(row));
    }
    Ok(EvalReport::new(
        Protocol::Holdout { train_ratio },
        seed,
        confusion,
    ))
}

/// Seeded stratified holdout split: about `train_ratio` of each class goes
/// to the training side.
pub fn stratified_split(
    matrix: &FeatureMatrix,
    train_ratio: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(0.0..1.0).contains(&train_ratio) || train_ratio == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "train ratio {train_ratio} outside (0, 1)"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_mask = vec![false; matrix.rows.len()];
    for class in [Label::Malware, Label::Goodware] {
        let mut members: Vec<usize> = matrix
            .rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == class)
            .map(|(i, _)| i)
            .collect();
        if members.len() < 2 {
            return Err(Error::TooFewSamples(format!(
                "class {class} has fewer than 2 rows"
            )));
        }
        members.shuffle(&mut rng);
        // At least one row on each side of the split.
        let take = ((members.len() as f64 * train_ratio).round() as usize)
            .clamp(1, members.len() - 1);
        for &r in &members[..take] {
            train_mask[r] = true;
        }
    }
    let pick = |keep: bool| FeatureMatrix {
        feature_names: matrix.feature_names.clone(),
        rows: matrix
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| train_mask[*i] == keep)
            .map(|(_, r)| r.clone())
            .collect(),
    };
    Ok((pick(true), pick(false)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_matrix, FeatureVector};

    fn toy_matrix(n_per_class: usize, features: usize, noise: impl Fn(usize, usize) -> u8) -> FeatureMatrix {
        let mut rows = Vec::new();
        for i in 0..n_per_class * 2 {
            let label = if i % 2 == 0 {
                Label::Malware
            } else {
                Label::Goodware
            };
            let bits: Vec<u8> = (0..features)
                .map(|f| {
                    if f == 0 {
                        u8::from(label == Label::Malware)
                    } else {
                        noise(i, f)
                    }
                })
                .collect();
            rows.push(FeatureVector {
                app_id: format!("r{i}"),
                label,
                bits,
            });
        }
        build_matrix(rows, (0..features).map(|f| format!("f{f}")).collect()).unwrap()
    }

    #[test]
    fn folds_are_stratified_within_one_row() {
        let m = toy_matrix(25, 4, |i, f| u8::from((i + f) % 3 == 0));
        let folds = stratified_folds(&m, 10, 3).unwrap();
        assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), 50);
        for fold in &folds {
            let malware = fold
                .iter()
                .filter(|&&r| m.rows[r].label == Label::Malware)
                .count();
            // 25 malware over 10 folds: 2 or 3 per fold.
            assert!((2..=3).contains(&malware), "fold malware count {malware}");
        }
    }

    #[test]
    fn separable_data_scores_ones() {
        let m = toy_matrix(20, 5, |i, f| u8::from((i * f) % 4 == 1));
        let report = kfold_evaluate(&m, 10, &ForestConfig::default(), 7).unwrap();
        assert_eq!(report.metrics.accuracy, 1.0);
        assert_eq!(report.metrics.tpr, 1.0);
        assert_eq!(report.metrics.fpr, 0.0);
        assert_eq!(report.confusion.total(), 50 * 0 + m.rows.len());
    }

    #[test]
    fn small_classes_are_rejected() {
        let m = toy_matrix(3, 2, |_, _| 0);
        assert!(matches!(
            kfold_evaluate(&m, 10, &ForestConfig::default(), 0).unwrap_err(),
            Error::TooFewSamples(_)
        ));
    }

    #[test]
    fn split_keeps_both_classes_on_both_sides() {
        let m = toy_matrix(10, 3, |i, _| u8::from(i % 2 == 0));
        let (train, test) = stratified_split(&m, 0.8, 5).unwrap();
        assert_eq!(train.rows.len() + test.rows.len(), m.rows.len());
        for part in [&train, &test] {
            assert!(part.rows.iter().any(|r| r.label == Label::Malware));
            assert!(part.rows.iter().any(|r| r.label == Label::Goodware));
        }
    }

    #[test]
    fn kfold_is_deterministic() {
        let m = toy_matrix(15, 6, |i, f| u8::from((i ^ f) % 5 < 2));
        let a = kfold_evaluate(&m, 5, &ForestConfig::default(), 21).unwrap();
        let b = kfold_evaluate(&m, 5, &ForestConfig::default(), 21).unwrap();
        assert_eq!(a, b);
    }
}
