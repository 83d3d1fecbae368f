//! App fingerprints and the Ochiai set distance between them.
//!
//! An app is represented by the *set* of its opcode subsequences: every
//! method body's opcode list is serialized canonically, digested to 64 bits
//! (see [`crate::hash`]) and deduplicated. Two apps P and Q with subsequence
//! sets A and B are compared with the Ochiai coefficient expressed as a
//! distance:
//!
//! ```text
//! d(P, Q) = 1 - |A ∩ B| / sqrt(|A| * |B|)
//! ```
//!
//! which is the cosine similarity of the sets' indicator vectors. The value
//! lies in [0, 1]; it is 0 exactly when the sets are equal and 1 exactly when
//! they are disjoint. Note that `d` does not satisfy the triangle inequality,
//! so neighbor queries must stay exact rather than lean on metric-tree
//! pruning.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dalvik::OpcodeSequence;
use crate::error::{Error, Result};
use crate::hash;

/// Class label carried through the whole pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Malware,
    Goodware,
    Unlabeled,
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Label::Malware => "malware",
            Label::Goodware => "goodware",
            Label::Unlabeled => "unlabeled",
        })
    }
}

impl std::str::FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "malware" => Ok(Label::Malware),
            "goodware" => Ok(Label::Goodware),
            "unlabeled" => Ok(Label::Unlabeled),
            other => Err(format!("unknown label `{other}`")),
        }
    }
}

/// The set of subsequence digests standing in for one app.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AppFingerprint {
    pub app_id: String,
    pub label: Label,
    /// Sorted, deduplicated digests.
    hashes: Vec<u64>,
    /// Number of method sequences the set was built from; at least `|hashes|`.
    pub source_method_count: usize,
}

impl AppFingerprint {
    /// Builds a fingerprint from raw digests; duplicates collapse.
    pub fn from_hashes(
        app_id: impl Into<String>,
        label: Label,
        hashes: impl IntoIterator<Item = u64>,
    ) -> AppFingerprint {
        let set: BTreeSet<u64> = hashes.into_iter().collect();
        let hashes: Vec<u64> = set.into_iter().collect();
        AppFingerprint {
            app_id: app_id.into(),
            label,
            source_method_count: hashes.len(),
            hashes,
        }
    }

    pub fn hashes(&self) -> &[u64] {
        &self.hashes
    }

    pub fn len(&self) -> usize {
        self.hashes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hashes.is_empty()
    }

    /// True when two fingerprints have exactly the same digest set.
    pub fn same_set(&self, other: &AppFingerprint) -> bool {
        self.hashes == other.hashes
    }

    /// A digest of the whole set, used to bucket exact duplicates.
    pub fn set_key(&self) -> u64 {
        let mut bytes = Vec::with_capacity(8 * self.hashes.len());
        for h in &self.hashes {
            bytes.extend_from_slice(&h.to_le_bytes());
        }
        hash::hash64(hash::DEFAULT_SEED, &bytes)
    }
}

/// Reduces an app's opcode sequences to a fingerprint.
///
/// Method order does not matter: the result is a set. Two methods with
/// identical opcode lists contribute one digest.
pub fn fingerprint_of(
    sequences: &[OpcodeSequence],
    app_id: &str,
    label: Label,
) -> Result<AppFingerprint> {
    if sequences.is_empty() {
        return Err(Error::EmptyApp(app_id.to_string()));
    }
    let digests: BTreeSet<u64> = sequences
        .iter()
        .map(|s| hash::sequence_digest(hash::DEFAULT_SEED, &s.opcodes))
        .collect();
    let hashes: Vec<u64> = digests.into_iter().collect();
    Ok(AppFingerprint {
        app_id: app_id.to_string(),
        label,
        source_method_count: sequences.len(),
        hashes,
    })
}

/// A distance in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Distance(f64);

impl Distance {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// The Ochiai distance `1 - |A ∩ B| / sqrt(|A| * |B|)`.
///
/// Symmetric by construction (intersection counting and the product under
/// the root are both order-independent), computed in double precision and
/// clamped against rounding at the boundaries.
pub fn ochiai_distance(a: &AppFingerprint, b: &AppFingerprint) -> Result<Distance> {
    if a.is_empty() {
        return Err(Error::EmptyFingerprint(a.app_id.clone()));
    }
    if b.is_empty() {
        return Err(Error::EmptyFingerprint(b.app_id.clone()));
    }
    let inter = intersection_size(&a.hashes, &b.hashes) as f64;
    let denom = ((a.len() as f64) * (b.len() as f64)).sqrt();
    Ok(Distance((1.0 - inter / denom).clamp(0.0, 1.0)))
}

/// Intersection cardinality of two sorted digest slices.
pub(crate) fn intersection_size(a: &[u64], b: &[u64]) -> usize {
    let mut count = 0;
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Exact neighbor oracle over a corpus of fingerprints.
///
/// Queries return exactly what a brute-force scan over all pairs would.
/// At `eps == 0` lookups go through equality buckets; above that the scan
/// prunes pairs whose size ratio alone already puts them out of range
/// (`|A ∩ B| <= min(|A|,|B|)` bounds the similarity by `sqrt(min/max)`),
/// then evaluates the remaining pairs exactly.
#[derive(Debug)]
pub struct NeighborIndex {
    fingerprints: Vec<AppFingerprint>,
    by_id: HashMap<String, usize>,
    equality_buckets: HashMap<u64, Vec<usize>>,
}

impl NeighborIndex {
    pub fn build(corpus: &[AppFingerprint]) -> Result<NeighborIndex> {
        let mut by_id = HashMap::with_capacity(corpus.len());
        let mut equality_buckets: HashMap<u64, Vec<usize>> = HashMap::new();
        for (i, fp) in corpus.iter().enumerate() {
            if fp.is_empty() {
                return Err(Error::EmptyFingerprint(fp.app_id.clone()));
            }
            if by_id.insert(fp.app_id.clone(), i).is_some() {
                return Err(Error::DuplicateAppId(fp.app_id.clone()));
            }
            equality_buckets.entry(fp.set_key()).or_default().push(i);
        }
        Ok(NeighborIndex {
            fingerprints: corpus.to_vec(),
            by_id,
            equality_buckets,
        })
    }

    pub fn len(&self) -> usize {
        self.fingerprints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fingerprints.is_empty()
    }

    /// All *other* apps at distance `<= eps` from `app_id`.
    pub fn neighbors_within(&self, app_id: &str, eps: f64) -> Result<Vec<&AppFingerprint>> {
        let &idx = self
            .by_id
            .get(app_id)
            .ok_or_else(|| Error::MismatchedClusterSet(app_id.to_string()))?;
        let me = &self.fingerprints[idx];

        if eps == 0.0 {
            let bucket = &self.equality_buckets[&me.set_key()];
            return Ok(bucket
                .iter()
                .copied()
                .filter(|&j| j != idx && self.fingerprints[j].same_set(me))
                .map(|j| &self.fingerprints[j])
                .collect());
        }

        let threshold = 1.0 - eps; // required similarity
        let hits: Vec<usize> = self
            .fingerprints
            .par_iter()
            .enumerate()
            .filter_map(|(j, other)| {
                if j == idx {
                    return None;
                }
                let (small, large) = if me.len() <= other.len() {
                    (me.len() as f64, other.len() as f64)
                } else {
                    (other.len() as f64, me.len() as f64)
                };
                if (small / large).sqrt() < threshold {
                    return None; // even a full overlap cannot reach eps
                }
                let d = ochiai_distance(me, other).expect("index holds no empty fingerprints");
                (d.value() <= eps).then_some(j)
            })
            .collect();
        let mut hits = hits;
        hits.sort_unstable();
        Ok(hits.into_iter().map(|j| &self.fingerprints[j]).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dalvik::OpcodeSequence;

    fn fp(id: &str, hashes: &[u64]) -> AppFingerprint {
        AppFingerprint::from_hashes(id, Label::Unlabeled, hashes.iter().copied())
    }

    fn seq(method_id: &str, opcodes: &[u8]) -> OpcodeSequence {
        OpcodeSequence {
            method_id: method_id.to_string(),
            opcodes: opcodes.to_vec(),
        }
    }

    #[test]
    fn identical_methods_collapse_into_one_digest() {
        let sequences = vec![seq("a", &[0x12, 0x0e]), seq("b", &[0x12, 0x0e])];
        let f = fingerprint_of(&sequences, "app", Label::Malware).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.source_method_count, 2);
    }

    #[test]
    fn fingerprint_ignores_method_order() {
        let a = vec![seq("a", &[1, 2]), seq("b", &[3]), seq("c", &[4, 5, 6])];
        let b = vec![seq("c", &[4, 5, 6]), seq("a", &[1, 2]), seq("b", &[3])];
        let fa = fingerprint_of(&a, "app", Label::Goodware).unwrap();
        let fb = fingerprint_of(&b, "app", Label::Goodware).unwrap();
        assert!(fa.same_set(&fb));
        assert_eq!(fa.len(), 3); // three distinct bodies, counted by hand
    }

    #[test]
    fn empty_app_cannot_be_fingerprinted() {
        assert!(matches!(
            fingerprint_of(&[], "app", Label::Malware).unwrap_err(),
            Error::EmptyApp(_)
        ));
    }

    #[test]
    fn distance_of_equal_sets_is_zero() {
        let a = fp("a", &[1, 2, 3]);
        let b = fp("b", &[1, 2, 3]);
        assert_eq!(ochiai_distance(&a, &b).unwrap().value(), 0.0);
    }

    #[test]
    fn distance_of_disjoint_sets_is_one() {
        let a = fp("a", &[1, 2]);
        let b = fp("b", &[3, 4, 5]);
        assert_eq!(ochiai_distance(&a, &b).unwrap().value(), 1.0);
    }

    #[test]
    fn worked_example_is_exact() {
        // |A| = 4, |B| = 9, |A ∩ B| = 3 -> 1 - 3/sqrt(36) = 0.5
        let a = fp("a", &[1, 2, 3, 4]);
        let b = fp("b", &[1, 2, 3, 10, 11, 12, 13, 14, 15]);
        assert_eq!(ochiai_distance(&a, &b).unwrap().value(), 0.5);
    }

    #[test]
    fn empty_fingerprint_is_rejected() {
        let a = fp("a", &[]);
        let b = fp("b", &[1]);
        assert!(matches!(
            ochiai_distance(&a, &b).unwrap_err(),
            Error::EmptyFingerprint(_)
        ));
    }

    #[test]
    fn singleton_corpus_has_no_neighbors() {
        let index = NeighborIndex::build(&[fp("only", &[1])]).unwrap();
        for eps in [0.0, 0.5, 1.0] {
            assert!(index.neighbors_within("only", eps).unwrap().is_empty());
        }
    }

    #[test]
    fn identical_apps_are_neighbors_at_zero() {
        let index = NeighborIndex::build(&[fp("a", &[1, 2]), fp("b", &[1, 2])]).unwrap();
        let n = index.neighbors_within("a", 0.0).unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n[0].app_id, "b");
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let err = NeighborIndex::build(&[fp("a", &[1]), fp("a", &[2])]).unwrap_err();
        assert!(matches!(err, Error::DuplicateAppId(_)));
    }
}
