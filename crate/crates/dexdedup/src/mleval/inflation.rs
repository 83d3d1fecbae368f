//! The holdout-inflation demonstration.
//!
//! When a corpus contains exact duplicates, a "lucky" train/test shuffle can
//! put a copy of every test app into the training set; the classifier then
//! scores by recall rather than generalization. Instead of reshuffling until
//! that happens, the demonstration constructs the adversarial split directly:
//! every duplicate group keeps one member in training and donates the rest to
//! the test side until the holdout ratio is met. The counterpart runs after
//! exact-duplicate removal with ordinary random splits over several seeds.
//!
//! The gap between the two accuracies is the inflation a duplicate-unaware
//! evaluation can report.

use rayon::prelude::*;
use std::collections::{HashMap, HashSet};

use crate::cluster;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::fingerprint::AppFingerprint;
use crate::hash;

use super::kfold::{holdout_evaluate, stratified_split};
use super::{EvalReport, ForestConfig};

/// One evaluated split plus how much of its test set was memorizable.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SplitEval {
    pub report: EvalReport,
    /// Fraction of test apps whose fingerprint also occurs in training.
    pub test_overlap: f64,
}

/// Both sides of the demonstration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InflationOutcome {
    /// Adversarial duplicate-aware split on the full corpus.
    pub before: SplitEval,
    /// Random splits on the deduplicated corpus, one per seed.
    pub after: Vec<SplitEval>,
    pub after_mean_accuracy: f64,
    /// Share of the corpus that exact-duplicate removal discards.
    pub duplicate_fraction: f64,
}

/// Runs the demonstration. `corpus` and `matrix` are joined on app id;
/// `train_ratio` is the holdout split (0.8 for the 80:20 rule of thumb).
pub fn holdout_inflation_demo(
    corpus: &[AppFingerprint],
    matrix: &FeatureMatrix,
    train_ratio: f64,
    seeds: &[u64],
    config: &ForestConfig,
) -> Result<InflationOutcome> {
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed required".into()));
    }
    let fp_by_id: HashMap<&str, &AppFingerprint> =
        corpus.iter().map(|f| (f.app_id.as_str(), f)).collect();
    for row in &matrix.rows {
        if !fp_by_id.contains_key(row.app_id.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "feature row `{}` has no fingerprint",
                row.app_id
            )));
        }
    }

    let groups = cluster::dedup_at_zero(corpus)?;
    let n = corpus.len();
    let duplicate_fraction = 1.0 - groups.cluster_count() as f64 / n as f64;
    if groups.cluster_count() == n {
        return Err(Error::NoDuplicates);
    }

    // Adversarial assignment: biggest duplicate groups donate members to the
    // test side first, always keeping their first member in training.
    let test_size = ((n as f64 * (1.0 - train_ratio)).round() as usize).clamp(1, n - 1);
    let mut by_size: Vec<&cluster::Cluster> = groups.clusters.iter().collect();
    by_size.sort_by_key(|c| std::cmp::Reverse(c.members.len()));
    let mut test_ids: HashSet<&str> = HashSet::new();
    'outer: for group in &by_size {
        for member in &group.members[1..] {
            if test_ids.len() == test_size {
                break 'outer;
            }
            test_ids.insert(member.as_str());
        }
    }
    // Not enough duplicates to fill the ratio: pad with singleton apps and
    // let the reported overlap show the shortfall.
    if test_ids.len() < test_size {
        for group in by_size.iter().rev() {
            if group.members.len() == 1 && test_ids.len() < test_size {
                test_ids.insert(group.members[0].as_str());
            }
        }
    }

    let train = matrix.select(|id| !test_ids.contains(id));
    let test = matrix.select(|id| test_ids.contains(id));
    let before_report = holdout_evaluate(&train, &test, config, train_ratio, config.seed)?;
    let before = SplitEval {
        test_overlap: overlap_fraction(&train, &test, &fp_by_id),
        report: before_report,
    };

    // Deduplicated counterpart: representatives only, ordinary random splits.
    let representatives = cluster::filter_representatives(corpus, &groups)?;
    let rep_ids: HashSet<&str> = representatives.iter().map(|f| f.app_id.as_str()).collect();
    let deduped = matrix.select(|id| rep_ids.contains(id));

    let after: Vec<SplitEval> = seeds
        .par_iter()
        .map(|&seed| -> Result<SplitEval> {
            let (train, test) = stratified_split(&deduped, train_ratio, seed)?;
            let run_config = config.with_seed(hash::hash64(config.seed, &seed.to_le_bytes()));
            let report = holdout_evaluate(&train, &test, &run_config, train_ratio, seed)?;
            Ok(SplitEval {
                test_overlap: overlap_fraction(&train, &test, &fp_by_id),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let after_mean_accuracy =
        after.iter().map(|s| s.report.metrics.accuracy).sum::<f64>() / after.len() as f64;
    Ok(InflationOutcome {
        before,
        after,
        after_mean_accuracy,
        duplicate_fraction,
    })
}

fn overlap_fraction(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
    fp_by_id: &HashMap<&str, &AppFingerprint>,
) -> f64 {
    if test.rows.is_empty() {
        return 0.0;
    }
    let train_keys: HashSet<u64> = train
        .rows
        .iter()
        .map(|r| fp_by_id[r.app_id.as_str()].set_key())
        .collect();
    let memorizable = test
        .rows
        .iter()
        .filter(|r| train_keys.contains(&fp_by_id[r.app_id.as_str()].set_key()))
        .count();
    memorizable as f64 / test.rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    #[test]
    fn duplicate_free_corpus_is_rejected() {
        let (corpus, matrix) = synthetic::inflation_corpus(12, 1, 5);
        assert!(matches!(
            holdout_inflation_demo(&corpus, &matrix, 0.8, &[1], &ForestConfig::default())
                .unwrap_err(),
            Error::NoDuplicates
        ));
    }

    #[test]
    fn adversarial_split_is_fully_memorizable() {
        let (corpus, matrix) = synthetic::inflation_corpus(20, 4, 5);
        let outcome =
            holdout_inflation_demo(&corpus, &matrix, 0.8, &[1, 2, 3], &ForestConfig::default())
                .unwrap();
        assert_eq!(outcome.before.test_overlap, 1.0);
        assert_eq!(outcome.duplicate_fraction, 0.75);
        for split in &outcome.after {
            assert_eq!(split.test_overlap, 0.0);
        }
    }
}
