//! Single-pass leader clustering over fingerprint distance.
//!
//! The algorithm repeatedly selects an unvisited app, gathers every
//! still-unclustered app within `epsilon` of it, and forms a cluster with the
//! selected app as centroid; clustered apps leave the pool and are never
//! reassigned. There is no density expansion: no `minPts`, no border points,
//! so a member is within `epsilon` of its centroid but two members of one
//! cluster may be further apart than that.
//!
//! Selection order is the only source of nondeterminism and it is pinned:
//! either a seeded RNG or plain input order. At `epsilon == 0` the resulting
//! partition is the set of exact-duplicate groups regardless of order; for
//! larger `epsilon` the partition (and so the cluster count) legitimately
//! depends on the visit order, which is why reports carry the seed.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fingerprint::{ochiai_distance, AppFingerprint};

/// A distance threshold in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Epsilon> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidConfig(format!(
                "epsilon {value} outside [0, 1]"
            )));
        }
        Ok(Epsilon(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// How the next unvisited app is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Uniformly at random among the remaining pool, from this seed.
    Seeded(u64),
    /// First remaining app in input order.
    Ordered,
}

impl SelectionMode {
    pub fn seed(&self) -> Option<u64> {
        match self {
            SelectionMode::Seeded(s) => Some(*s),
            SelectionMode::Ordered => None,
        }
    }
}

/// One cluster: the centroid id plus all member ids (centroid included,
/// first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub centroid: String,
    pub members: Vec<String>,
}

/// A partition of the corpus into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub epsilon: f64,
    pub mode: SelectionMode,
    pub clusters: Vec<Cluster>,
}

impl ClusterSet {
    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    /// The induced partition as a canonical set of sorted member lists,
    /// independent of centroid choice and cluster order.
    pub fn partition(&self) -> Vec<Vec<String>> {
        let mut groups: Vec<Vec<String>> = self
            .clusters
            .iter()
            .map(|c| {
                let mut m = c.members.clone();
                m.sort();
                m
            })
            .collect();
        groups.sort();
        groups
    }
}

/// Runs leader clustering over the corpus.
pub fn cluster_corpus(
    corpus: &[AppFingerprint],
    epsilon: Epsilon,
    mode: SelectionMode,
) -> Result<ClusterSet> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut seen = HashMap::new();
    for fp in corpus {
        if fp.is_empty() {
            return Err(Error::EmptyFingerprint(fp.app_id.clone()));
        }
        if seen.insert(fp.app_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateAppId(fp.app_id.clone()));
        }
    }

    let mut rng = match mode {
        SelectionMode::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        SelectionMode::Ordered => None,
    };

    // Pool of unclustered indices, kept in input order.
    let mut pool: Vec<usize> = (0..corpus.len()).collect();
    let mut clusters = Vec::new();
    while !pool.is_empty() {
        let pick = match rng.as_mut() {
            Some(rng) => rng.gen_range(0..pool.len()),
            None => 0,
        };
        let centroid = pool[pick];
        let neighbor_flags: Vec<bool> = pool
            .par_iter()
            .map(|&j| {
                j != centroid
                    && ochiai_distance(&corpus[centroid], &corpus[j])
                        .expect("pool holds no empty fingerprints")
                        .value()
                        <= epsilon.value()
            })
            .collect();

        let mut members = vec![corpus[centroid].app_id.clone()];
        members.extend(
            pool.iter()
                .zip(&neighbor_flags)
                .filter(|&(_, &is_neighbor)| is_neighbor)
                .map(|(&j, _)| corpus[j].app_id.clone()),
        );
        clusters.push(Cluster {
            centroid: corpus[centroid].app_id.clone(),
            members,
        });

        let mut clustered = vec![false; corpus.len()];
        clustered[centroid] = true;
        for (&j, &is_neighbor) in pool.iter().zip(&neighbor_flags) {
            if is_neighbor {
                clustered[j] = true;
            }
        }
        pool.retain(|&j| !clustered[j]);
    }

    Ok(ClusterSet {
        epsilon: epsilon.value(),
        mode,
        clusters,
    })
}

/// Exact-duplicate grouping: clusters are the equivalence classes of
/// fingerprint-set equality. Equivalent to `cluster_corpus` at `epsilon == 0`
/// as a partition, but computed by grouping rather than pairwise distances.
pub fn dedup_at_zero(corpus: &[AppFingerprint]) -> Result<ClusterSet> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut seen = HashMap::new();
    // (set_key bucket, then exact set comparison to rule out digest collisions)
    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut order: Vec<(usize, Vec<usize>)> = Vec::new(); // (first index, members)
    for (i, fp) in corpus.iter().enumerate() {
        if fp.is_empty() {
            return Err(Error::EmptyFingerprint(fp.app_id.clone()));
        }
        if seen.insert(fp.app_id.as_str(), ()).is_some() {
            return Err(Error::DuplicateAppId(fp.app_id.clone()));
        }
        let key = fp.set_key();
        let bucket = buckets.entry(key).or_default();
        if let Some(&leader) = bucket.iter().find(|&&j| corpus[j].same_set(fp)) {
            order
                .iter_mut()
                .find(|(first, _)| *first == leader)
                .expect("leader was recorded")
                .1
                .push(i);
        } else {
            bucket.push(i);
            order.push((i, vec![i]));
        }
    }

    let clusters = order
        .into_iter()
        .map(|(first, members)| Cluster {
            centroid: corpus[first].app_id.clone(),
            members: members
                .into_iter()
                .map(|j| corpus[j].app_id.clone())
                .collect(),
        })
        .collect();
    Ok(ClusterSet {
        epsilon: 0.0,
        mode: SelectionMode::Ordered,
        clusters,
    })
}

/// Clusters the corpus once per grid value with the same selection mode and
/// reports `(epsilon, cluster_count)` pairs, ready for plotting.
pub fn epsilon_sweep(
    corpus: &[AppFingerprint],
    grid: &[Epsilon],
    mode: SelectionMode,
) -> Result<Vec<(f64, usize)>> {
    let mut out = Vec::with_capacity(grid.len());
    for &eps in grid {
        let set = cluster_corpus(corpus, eps, mode)?;
        out.push((eps.value(), set.cluster_count()));
    }
    Ok(out)
}

/// Keeps exactly the centroid app of each cluster, labels preserved.
///
/// Per-class dataset construction is the caller's composition: cluster the
/// malware and goodware subsets separately and filter each.
pub fn filter_representatives(
    corpus: &[AppFingerprint],
    set: &ClusterSet,
) -> Result<Vec<AppFingerprint>> {
    let by_id: HashMap<&str, &AppFingerprint> =
        corpus.iter().map(|fp| (fp.app_id.as_str(), fp)).collect();
    for cluster in &set.clusters {
        for id in std::iter::once(&cluster.centroid).chain(cluster.members.iter()) {
            if !by_id.contains_key(id.as_str()) {
                return Err(Error::MismatchedClusterSet(id.clone()));
            }
        }
    }
    Ok(set
        .clusters
        .iter()
        .map(|c| by_id[c.centroid.as_str()].clone())
        .collect())
}

/// Parses a `start:end:step` grid expression into epsilon values
/// (inclusive of both endpoints, step > 0).
pub fn parse_grid(spec: &str) -> Result<Vec<Epsilon>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Error::InvalidConfig(format!("grid `{spec}` is not start:end:step"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].parse().map_err(|_| bad())?;
    let end: f64 = parts[1].parse().map_err(|_| bad())?;
    let step: f64 = parts[2].parse().map_err(|_| bad())?;
    if step <= 0.0 || end < start {
        return Err(bad());
    }
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        // Multiply instead of accumulating so 0.1 steps do not drift.
        let v = start + step * k as f64;
        if v > end + 1e-12 {
            break;
        }
        out.push(Epsilon::new(v.min(end).min(1.0).max(0.0))?);
        k += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::Label;

    fn fp(id: &str, hashes: &[u64]) -> AppFingerprint {
        AppFingerprint::from_hashes(id, Label::Unlabeled, hashes.iter().copied())
    }

    fn fp_labeled(id: &str, label: Label, hashes: &[u64]) -> AppFingerprint {
        AppFingerprint::from_hashes(id, label, hashes.iter().copied())
    }

    #[test]
    fn identical_corpus_forms_one_cluster() {
        let corpus: Vec<_> = (0..8).map(|i| fp(&format!("a{i}"), &[1, 2, 3])).collect();
        for eps in [0.0, 0.4, 1.0] {
            let set =
                cluster_corpus(&corpus, Epsilon::new(eps).unwrap(), SelectionMode::Seeded(7))
                    .unwrap();
            assert_eq!(set.cluster_count(), 1);
            assert_eq!(set.clusters[0].members.len(), 8);
        }
    }

    #[test]
    fn epsilon_one_swallows_everything() {
        let corpus = vec![fp("a", &[1]), fp("b", &[2]), fp("c", &[3, 4])];
        let set =
            cluster_corpus(&corpus, Epsilon::new(1.0).unwrap(), SelectionMode::Seeded(1)).unwrap();
        assert_eq!(set.cluster_count(), 1);
    }

    /// Five apps with a known distance matrix, ordered mode, traced by hand:
    ///
    /// d(A,B) = 1 - 3/sqrt(16)  = 0.25
    /// d(A,C) = 1 - 2/sqrt(16)  = 0.50
    /// d(D,E) = 1 - 2/sqrt(8)   = 0.2929
    /// all other pairs >= 0.5
    ///
    /// At eps = 0.3: visit A -> {A, B}; visit C -> {C}; visit D -> {D, E}.
    #[test]
    fn hand_traced_five_app_fixture() {
        let corpus = vec![
            fp("A", &[1, 2, 3, 4]),
            fp("B", &[1, 2, 3, 5]),
            fp("C", &[1, 2, 6, 7]),
            fp("D", &[8, 9]),
            fp("E", &[8, 9, 10, 11]),
        ];
        let set =
            cluster_corpus(&corpus, Epsilon::new(0.3).unwrap(), SelectionMode::Ordered).unwrap();
        let expected = vec![
            Cluster {
                centroid: "A".into(),
                members: vec!["A".into(), "B".into()],
            },
            Cluster {
                centroid: "C".into(),
                members: vec!["C".into()],
            },
            Cluster {
                centroid: "D".into(),
                members: vec!["D".into(), "E".into()],
            },
        ];
        assert_eq!(set.clusters, expected);
    }

    #[test]
    fn dedup_groups_exact_copies() {
        let corpus = vec![fp("a1", &[1, 2]), fp("a2", &[1, 2]), fp("b", &[3])];
        let set = dedup_at_zero(&corpus).unwrap();
        assert_eq!(set.cluster_count(), 2);
        assert_eq!(set.clusters[0].members, vec!["a1", "a2"]);
    }

    #[test]
    fn dedup_on_distinct_corpus_is_all_singletons() {
        let corpus: Vec<_> = (0..6).map(|i| fp(&format!("x{i}"), &[i as u64])).collect();
        let set = dedup_at_zero(&corpus).unwrap();
        assert_eq!(set.cluster_count(), 6);
    }

    #[test]
    fn dedup_partition_matches_clustering_at_zero() {
        let corpus = vec![
            fp("a", &[1, 2]),
            fp("b", &[3]),
            fp("c", &[1, 2]),
            fp("d", &[3]),
            fp("e", &[9, 10, 11]),
        ];
        let by_grouping = dedup_at_zero(&corpus).unwrap();
        for seed in [0, 1, 42] {
            let by_clustering = cluster_corpus(
                &corpus,
                Epsilon::new(0.0).unwrap(),
                SelectionMode::Seeded(seed),
            )
            .unwrap();
            assert_eq!(by_grouping.partition(), by_clustering.partition());
        }
    }

    #[test]
    fn sweep_endpoints() {
        let corpus = vec![fp("a", &[1]), fp("b", &[1]), fp("c", &[2]), fp("d", &[3])];
        let grid = [Epsilon::new(0.0).unwrap(), Epsilon::new(1.0).unwrap()];
        let counts = epsilon_sweep(&corpus, &grid, SelectionMode::Seeded(3)).unwrap();
        assert_eq!(counts, vec![(0.0, 3), (1.0, 1)]);
    }

    #[test]
    fn three_well_separated_blobs_stay_apart() {
        // Within a blob every pair shares 100 of 101 elements
        // (d = 1 - 100/101 ≈ 0.0099); across blobs sets are disjoint (d = 1).
        let mut corpus = Vec::new();
        for blob in 0..3u64 {
            let base: Vec<u64> = (0..100).map(|k| blob * 10_000 + k).collect();
            for member in 0..4u64 {
                let mut hashes = base.clone();
                hashes.push(blob * 10_000 + 1000 + member);
                corpus.push(fp(&format!("b{blob}m{member}"), &hashes));
            }
        }
        let set =
            cluster_corpus(&corpus, Epsilon::new(0.2).unwrap(), SelectionMode::Seeded(5)).unwrap();
        assert_eq!(set.cluster_count(), 3);
    }

    #[test]
    fn representatives_are_centroids_with_labels() {
        let corpus = vec![
            fp_labeled("a1", Label::Malware, &[1, 2]),
            fp_labeled("a2", Label::Malware, &[1, 2]),
            fp_labeled("b", Label::Goodware, &[3]),
        ];
        let set = dedup_at_zero(&corpus).unwrap();
        let reps = filter_representatives(&corpus, &set).unwrap();
        assert_eq!(reps.len(), 2);
        assert_eq!(reps[0].app_id, "a1");
        assert_eq!(reps[0].label, Label::Malware);
        assert_eq!(reps[1].label, Label::Goodware);
    }

    #[test]
    fn singleton_clusters_filter_to_the_whole_corpus() {
        let corpus: Vec<_> = (0..5).map(|i| fp(&format!("x{i}"), &[i as u64])).collect();
        let set = dedup_at_zero(&corpus).unwrap();
        let reps = filter_representatives(&corpus, &set).unwrap();
        assert_eq!(reps, corpus);
    }

    #[test]
    fn foreign_cluster_report_is_rejected() {
        let corpus = vec![fp("a", &[1])];
        let set = ClusterSet {
            epsilon: 0.0,
            mode: SelectionMode::Ordered,
            clusters: vec![Cluster {
                centroid: "ghost".into(),
                members: vec!["ghost".into()],
            }],
        };
        assert!(matches!(
            filter_representatives(&corpus, &set).unwrap_err(),
            Error::MismatchedClusterSet(_)
        ));
    }

    #[test]
    fn seed_determinism_is_exact() {
        let corpus: Vec<_> = (0..30)
            .map(|i| fp(&format!("x{i}"), &[i as u64 % 7, i as u64 % 5 + 100]))
            .collect();
        let eps = Epsilon::new(0.4).unwrap();
        let a = cluster_corpus(&corpus, eps, SelectionMode::Seeded(99)).unwrap();
        let b = cluster_corpus(&corpus, eps, SelectionMode::Seeded(99)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn grid_parses_inclusive_range() {
        let grid = parse_grid("0:1:0.1").unwrap();
        assert_eq!(grid.len(), 11);
        assert_eq!(grid[0].value(), 0.0);
        assert_eq!(grid[10].value(), 1.0);
        assert!(parse_grid("0:1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
    }
}
