//! Class balancing by seeded down-sampling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::fingerprint::Label;

/// Down-samples the majority class to the minority class size, uniformly
/// under the seed. Minority rows are never touched and surviving rows keep
/// their original order. An already balanced matrix comes back unchanged.
pub fn balance_dataset(matrix: &FeatureMatrix, seed: u64) -> Result<FeatureMatrix> {
    let malware: Vec<usize> = rows_of(matrix, Label::Malware);
    let goodware: Vec<usize> = rows_of(matrix, Label::Goodware);
    if malware.is_empty() || goodware.is_empty() {
        return Err(Error::DegenerateLabels(
            "balancing needs both classes present".into(),
        ));
    }
    if malware.len() == goodware.len() {
        return Ok(matrix.clone());
    }

    let (majority, minority_len) = if malware.len() > goodware.len() {
        (malware, goodware.len())
    } else {
        (goodware, malware.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffled = majority;
    shuffled.shuffle(&mut rng);
    let mut keep = vec![true; matrix.rows.len()];
    for &drop in &shuffled[minority_len..] {
        keep[drop] = false;
    }

    Ok(FeatureMatrix {
        feature_names: matrix.feature_names.clone(),
        rows: matrix
            .rows
            .iter()
            .enumerate()
            .filter(|(i, _)| keep[*i])
            .map(|(_, r)| r.clone())
            .collect(),
    })
}

fn rows_of(matrix: &FeatureMatrix, label: Label) -> Vec<usize> {
    matrix
        .rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.label == label)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_matrix, FeatureVector};

    fn matrix(malware: usize, goodware: usize) -> FeatureMatrix {
        let rows = (0..malware + goodware)
            .map(|i| FeatureVector {
                app_id: format!("r{i}"),
                label: if i < malware {
                    Label::Malware
                } else {
                    Label::Goodware
                },
                bits: vec![u8::from(i % 2 == 0)],
            })
            .collect();
        build_matrix(rows, vec!["f".to_string()]).unwrap()
    }

    #[test]
    fn majority_shrinks_to_minority_size() {
        let m = matrix(40, 100);
        let balanced = balance_dataset(&m, 9).unwrap();
        let malware = balanced
            .rows
            .iter()
            .filter(|r| r.label == Label::Malware)
            .count();
        assert_eq!(malware, 40);
        assert_eq!(balanced.rows.len(), 80);
    }

    #[test]
    fn minority_rows_survive_untouched() {
        let m = matrix(40, 100);
        let balanced = balance_dataset(&m, 9).unwrap();
        let original_malware: Vec<&FeatureVector> = m
            .rows
            .iter()
            .filter(|r| r.label == Label::Malware)
            .collect();
        let kept_malware: Vec<&FeatureVector> = balanced
            .rows
            .iter()
            .filter(|r| r.label == Label::Malware)
            .collect();
        assert_eq!(original_malware, kept_malware);
    }

    #[test]
    fn already_balanced_is_identity() {
        let m = matrix(30, 30);
        let balanced = balance_dataset(&m, 1).unwrap();
        assert_eq!(m, balanced);
    }

    #[test]
    fn same_seed_same_selection() {
        let m = matrix(10, 80);
        let a = balance_dataset(&m, 123).unwrap();
        let b = balance_dataset(&m, 123).unwrap();
        assert_eq!(a, b);
        let c = balance_dataset(&m, 124).unwrap();
        assert_ne!(a, c); // different seed picks a different subset
    }

    #[test]
    fn single_class_is_rejected() {
        let m = matrix(5, 0);
        assert!(matches!(
            balance_dataset(&m, 0).unwrap_err(),
            Error::DegenerateLabels(_)
        ));
    }
}
