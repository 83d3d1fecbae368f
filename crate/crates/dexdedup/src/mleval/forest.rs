//! A random forest over binary feature vectors.
//!
//! Each tree trains on a bootstrap resample and splits greedily on the
//! maximum-information-gain feature among a per-node random subset. Without
//! bootstrap, with the full feature set and a single tree this degenerates
//! into the plain deterministic greedy tree, which is what the hand-traceable
//! tests pin down. Hyperparameters follow the common defaults: 100 trees,
//! unlimited depth, ceil(sqrt(F)) features per split, bootstrap on.
//!
//! Randomness never leaks across trees: tree `i` draws from its own stream
//! seeded by `(config.seed, i)`, so training in parallel cannot change the
//! model.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, FeatureVector};
use crate::fingerprint::Label;
use crate::hash;

use super::infogain::entropy;

/// Forest hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ForestConfig {
    pub tree_count: usize,
    /// `None` grows trees until pure.
    pub max_depth: Option<usize>,
    /// `None` means `ceil(sqrt(F))`, resolved at training time.
    pub features_per_split: Option<usize>,
    pub seed: u64,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> ForestConfig {
        ForestConfig {
            tree_count: 100,
            max_depth: None,
            features_per_split: None,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    /// The single deterministic greedy tree: no bootstrap, all features.
    pub fn single_tree(seed: u64) -> ForestConfig {
        ForestConfig {
            tree_count: 1,
            max_depth: None,
            features_per_split: Some(usize::MAX), // clamped to F at training
            seed,
            bootstrap: false,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> ForestConfig {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf(Label),
    Split {
        feature: usize,
        zero: Box<Node>,
        one: Box<Node>,
    },
}

impl Node {
    fn predict(&self, bits: &[u8]) -> Label {
        match self {
            Node::Leaf(label) => *label,
            Node::Split { feature, zero, one } => {
                if bits[*feature] == 1 {
                    one.predict(bits)
                } else {
                    zero.predict(bits)
                }
            }
        }
    }
}

/// A trained forest.
#[derive(Debug, Clone)]
pub struct Forest {
    trees: Vec<Node>,
}

impl Forest {
    /// Trains on a labeled matrix. Both classes must be present.
    pub fn train(matrix: &FeatureMatrix, config: &ForestConfig) -> Result<Forest> {
        if config.tree_count == 0 {
            return Err(Error::InvalidConfig("tree_count must be at least 1".into()));
        }
        let malware = matrix
            .rows
            .iter()
            .filter(|r| r.label == Label::Malware)
            .count();
        if matrix.rows.is_empty() || malware == 0 || malware == matrix.rows.len() {
            return Err(Error::DegenerateLabels(
                "training needs both malware and goodware rows".into(),
            ));
        }
        let width = matrix.width();
        let per_split = config
            .features_per_split
            .unwrap_or_else(|| (width as f64).sqrt().ceil() as usize)
            .clamp(1, width);

        let trees: Vec<Node> = (0..config.tree_count)
            .into_par_iter()
            .map(|tree_idx| {
                let stream = hash::hash64(config.seed, &(tree_idx as u64).to_le_bytes());
                let mut rng = ChaCha8Rng::seed_from_u64(stream);
                let rows: Vec<usize> = if config.bootstrap {
                    (0..matrix.rows.len())
                        .map(|_| rng.gen_range(0..matrix.rows.len()))
                        .collect()
                } else {
                    (0..matrix.rows.len()).collect()
                };
                grow(matrix, &rows, per_split, config.max_depth, 0, &mut rng)
            })
            .collect();
        Ok(Forest { trees })
    }

    /// Majority vote over the trees; exact ties go to malware.
    pub fn predict(&self, row: &FeatureVector) -> Label {
        let malware_votes = self
            .trees
            .iter()
            .filter(|t| t.predict(&row.bits) == Label::Malware)
            .count();
        if 2 * malware_votes >= self.trees.len() {
            Label::Malware
        } else {
            Label::Goodware
        }
    }
}

fn majority(matrix: &FeatureMatrix, rows: &[usize]) -> Label {
    let malware = rows
        .iter()
        .filter(|&&r| matrix.rows[r].label == Label::Malware)
        .count();
    // Ties lean malware, matching the forest-level vote.
    if 2 * malware >= rows.len() {
        Label::Malware
    } else {
        Label::Goodware
    }
}

fn grow(
    matrix: &FeatureMatrix,
    rows: &[usize],
    per_split: usize,
    max_depth: Option<usize>,
    depth: usize,
    rng: &mut ChaCha8Rng,
) -> Node {
    let first = matrix.rows[rows[0]].label;
    if rows.iter().all(|&r| matrix.rows[r].label == first) {
        return Node::Leaf(first);
    }
    if max_depth.is_some_and(|d| depth >= d) {
        return Node::Leaf(majority(matrix, rows));
    }

    let width = matrix.width();
    let candidates: Vec<usize> = if per_split >= width {
        (0..width).collect()
    } else {
        sample_without_replacement(width, per_split, rng)
    };

    // Max gain, ties broken by the lowest feature index.
    let mut best: Option<(usize, f64)> = None;
    for &f in &candidates {
        let gain = split_gain(matrix, rows, f);
        let better = match best {
            None => gain > 0.0,
            Some((bf, bg)) => gain > bg || (gain == bg && f < bf && gain > 0.0),
        };
        if better {
            best = Some((f, gain));
        }
    }
    let Some((feature, _)) = best else {
        return Node::Leaf(majority(matrix, rows));
    };

    let (zero_rows, one_rows): (Vec<usize>, Vec<usize>) =
        rows.iter().partition(|&&r| matrix.rows[r].bits[feature] == 0);
    if zero_rows.is_empty() || one_rows.is_empty() {
        return Node::Leaf(majority(matrix, rows));
    }
    Node::Split {
        feature,
        zero: Box::new(grow(matrix, &zero_rows, per_split, max_depth, depth + 1, rng)),
        one: Box::new(grow(matrix, &one_rows, per_split, max_depth, depth + 1, rng)),
    }
}

fn split_gain(matrix: &FeatureMatrix, rows: &[usize], feature: usize) -> f64 {
    let mut on = (0usize, 0usize);
    let mut off = (0usize, 0usize);
    for &r in rows {
        let row = &matrix.rows[r];
        let side = if row.bits[feature] == 1 {
            &mut on
        } else {
            &mut off
        };
        if row.label == Label::Malware {
            side.0 += 1;
        } else {
            side.1 += 1;
        }
    }
    let n = rows.len() as f64;
    let class = entropy(on.0 + off.0, on.1 + off.1);
    class
        - (on.0 + on.1) as f64 / n * entropy(on.0, on.1)
        - (off.0 + off.1) as f64 / n * entropy(off.0, off.1)
}

/// Partial Fisher-Yates draw of `k` distinct values below `n`, sorted.
fn sample_without_replacement(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    let mut picked = pool[..k].to_vec();
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::build_matrix;

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
    fn label_equal_feature_is_learned_exactly() {
        let m = matrix(
            &["noise", "signal"],
            &[
                ("a", Label::Malware, &[1, 1]),
                ("b", Label::Malware, &[0, 1]),
                ("c", Label::Goodware, &[1, 0]),
                ("d", Label::Goodware, &[0, 0]),
            ],
        );
        let forest = Forest::train(&m, &ForestConfig::default()).unwrap();
        for row in &m.rows {
            assert_eq!(forest.predict(row), row.label);
        }
    }

    /// Six rows traced by hand. Gains on the full set:
    /// f0 splits 4/2 with one impure side, f1 is constant, f2 is cleaner.
    /// The greedy root must be f2, then f0 resolves the remaining mix.
    #[test]
    fn deterministic_tree_matches_hand_trace() {
        let m = matrix(
            &["f0", "f1", "f2"],
            &[
                ("a", Label::Malware, &[1, 1, 1]),
                ("b", Label::Malware, &[1, 1, 1]),
                ("c", Label::Malware, &[1, 1, 0]),
                ("d", Label::Goodware, &[0, 1, 0]),
                ("e", Label::Goodware, &[0, 1, 0]),
                ("f", Label::Goodware, &[1, 1, 0]),
            ],
        );
        // By hand: H = 1. Root gains: f0 -> 1 - (4/6)*0.8113 = 0.4591,
        // f1 -> 0, f2 -> 1 - (4/6)*0.8113 = 0.4591. Tie between f0 and f2
        // breaks to f0. Left branch (f0 = 0) is pure goodware. Right branch
        // {a, b, c, f}: f2 separates it exactly.
        let forest = Forest::train(&m, &ForestConfig::single_tree(0)).unwrap();
        let tree = &forest.trees[0];
        match tree {
            Node::Split { feature: 0, zero, one } => {
                assert!(matches!(**zero, Node::Leaf(Label::Goodware)));
                match &**one {
                    Node::Split { feature: 2, zero, one } => {
                        assert!(matches!(**zero, Node::Leaf(_)));
                        assert!(matches!(**one, Node::Leaf(Label::Malware)));
                    }
                    other => panic!("expected split on f2, got {other:?}"),
                }
            }
            other => panic!("expected split on f0 at the root, got {other:?}"),
        }
        for row in &m.rows {
            let expected = if row.app_id == "f" {
                // {c, f} share bits [1,1,0] with opposing labels; the tied
                // leaf votes malware.
                Label::Malware
            } else {
                row.label
            };
            assert_eq!(forest.predict(row), expected, "row {}", row.app_id);
        }
    }

    #[test]
    fn same_seed_same_predictions() {
        let rows: Vec<(String, Label, Vec<u8>)> = (0..40)
            .map(|i| {
                let label = if i % 2 == 0 {
                    Label::Malware
                } else {
                    Label::Goodware
                };
                let bits: Vec<u8> = (0..12)
                    .map(|j| u8::from((i * 7 + j * 3) % 5 < 2))
                    .collect();
                (format!("r{i}"), label, bits)
            })
            .collect();
        let m = build_matrix(
            rows.iter()
                .map(|(id, label, bits)| FeatureVector {
                    app_id: id.clone(),
                    label: *label,
                    bits: bits.clone(),
                })
                .collect(),
            (0..12).map(|i| format!("f{i}")).collect(),
        )
        .unwrap();
        let config = ForestConfig::default().with_seed(11);
        let a = Forest::train(&m, &config).unwrap();
        let b = Forest::train(&m, &config).unwrap();
        for row in &m.rows {
            assert_eq!(a.predict(row), b.predict(row));
        }
    }

    #[test]
    fn degenerate_labels_are_rejected() {
        let m = matrix(
            &["f"],
            &[("a", Label::Malware, &[1]), ("b", Label::Malware, &[0])],
        );
        assert!(matches!(
            Forest::train(&m, &ForestConfig::default()).unwrap_err(),
            Error::DegenerateLabels(_)
        ));
    }
}
