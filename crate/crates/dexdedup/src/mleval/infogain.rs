//! Information gain of each feature with respect to the class label.
//!
//! `IG(f) = H(label) - Σ_v P(f = v) · H(label | f = v)`, base-2 logs, so a
//! binary label bounds every gain by one bit.

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::fingerprint::Label;

/// Gains per feature, sorted descending; ties keep catalog order.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoGainReport {
    pub entries: Vec<(String, f64)>,
    /// True when only one class was present: every gain is zero and the
    /// ranking is meaningless.
    pub degenerate: bool,
}

/// Computes the information gain of every feature column.
pub fn information_gain(matrix: &FeatureMatrix) -> Result<InfoGainReport> {
    if matrix.rows.len() < 2 {
        return Err(Error::TooFewSamples(format!(
            "information gain needs at least 2 rows, got {}",
            matrix.rows.len()
        )));
    }
    let malware = matrix
        .rows
        .iter()
        .filter(|r| r.label == Label::Malware)
        .count();
    let total = matrix.rows.len();
    let degenerate = malware == 0 || malware == total;

    let class_entropy = entropy(malware, total - malware);
    let mut scored: Vec<(usize, f64)> = Vec::with_capacity(matrix.width());
    for f in 0..matrix.width() {
        if degenerate {
            scored.push((f, 0.0));
            continue;
        }
        let mut on = (0usize, 0usize); // (malware, goodware) with bit 1
        let mut off = (0usize, 0usize);
        for row in &matrix.rows {
            let side = if row.bits[f] == 1 { &mut on } else { &mut off };
            if row.label == Label::Malware {
                side.0 += 1;
            } else {
                side.1 += 1;
            }
        }
        let n = total as f64;
        let weighted = (on.0 + on.1) as f64 / n * entropy(on.0, on.1)
            + (off.0 + off.1) as f64 / n * entropy(off.0, off.1);
        scored.push((f, class_entropy - weighted));
    }

    // Descending by gain; equal gains stay in catalog order.
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    Ok(InfoGainReport {
        entries: scored
            .into_iter()
            .map(|(f, g)| (matrix.feature_names[f].clone(), g))
            .collect(),
        degenerate,
    })
}

/// Entropy in bits of a two-way count.
pub fn entropy(a: usize, b: usize) -> f64 {
    let n = (a + b) as f64;
    if a == 0 || b == 0 {
        return 0.0;
    }
    let pa = a as f64 / n;
    let pb = b as f64 / n;
    -(pa * pa.log2() + pb * pb.log2())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{build_matrix, FeatureVector};

    fn matrix(names: &[&str], rows: &[(&str, Label, &[u8])]) -> FeatureMatrix {
        build_matrix(
            rows.iter()
                .map(|(id, label, bits)| FeatureVector {
                    app_id: id.to_string(),
                    label: *label,
                    bits: bits.to_vec(),
                })
                .collect(),
            names.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn perfect_feature_gains_one_bit() {
        let m = matrix(
            &["f"],
            &[
                ("a", Label::Malware, &[1]),
                ("b", Label::Malware, &[1]),
                ("c", Label::Goodware, &[0]),
                ("d", Label::Goodware, &[0]),
            ],
        );
        let report = information_gain(&m).unwrap();
        assert!((report.entries[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_feature_gains_nothing() {
        let m = matrix(
            &["f"],
            &[
                ("a", Label::Malware, &[1]),
                ("b", Label::Goodware, &[1]),
            ],
        );
        let report = information_gain(&m).unwrap();
        assert_eq!(report.entries[0].1, 0.0);
    }

    #[test]
    fn worked_four_row_example() {
        // rows {(1,M),(1,M),(0,G),(1,G)}: H(label) = 1,
        // H(label | f=1) = 0.9183 over 3 rows, H(label | f=0) = 0 over 1 row,
        // IG = 1 - 0.75 * 0.9183 = 0.3113
        let m = matrix(
            &["f"],
            &[
                ("a", Label::Malware, &[1]),
                ("b", Label::Malware, &[1]),
                ("c", Label::Goodware, &[0]),
                ("d", Label::Goodware, &[1]),
            ],
        );
        let report = information_gain(&m).unwrap();
        assert!((report.entries[0].1 - 0.3113).abs() < 1e-4);
    }

    #[test]
    fn single_class_reports_degenerate_zeros() {
        let m = matrix(
            &["f", "g"],
            &[
                ("a", Label::Malware, &[1, 0]),
                ("b", Label::Malware, &[0, 1]),
            ],
        );
        let report = information_gain(&m).unwrap();
        assert!(report.degenerate);
        assert!(report.entries.iter().all(|(_, g)| *g == 0.0));
    }

    #[test]
    fn ranking_is_descending_with_stable_ties() {
        let m = matrix(
            &["weak", "perfect", "zero"],
            &[
                ("a", Label::Malware, &[1, 1, 1]),
                ("b", Label::Malware, &[1, 1, 1]),
                ("c", Label::Goodware, &[1, 0, 1]),
                ("d", Label::Goodware, &[0, 0, 1]),
            ],
        );
        let report = information_gain(&m).unwrap();
        assert_eq!(report.entries[0].0, "perfect");
        assert_eq!(report.entries[2].0, "zero");
    }
}
