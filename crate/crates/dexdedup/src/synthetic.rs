//! Deterministic synthetic corpora for demos, tests and end-to-end runs.
//!
//! Real malware corpora cannot be redistributed, so everything here is
//! generated: fingerprint corpora with controlled duplicate structure,
//! labeled feature matrices with a learnable but imperfect signal, and whole
//! apk bundles whose dex code and manifests reproduce both at once. All
//! generators are pure functions of their seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dalvik::builder::DexBuilder;
use crate::features::{axml, build_matrix, FeatureMatrix, FeatureSet, FeatureVector};
use crate::fingerprint::{AppFingerprint, Label};

/// Informative fraction of the API-call feature columns: malware leans on
/// the first group, goodware on the second.
const MALWARE_APIS: [&str; 6] = [
    "sendTextMessage",
    "getDeviceId",
    "getSubscriberId",
    "createFromPdu",
    "getSimSerialNumber",
    "getLine1Number",
];
const GOODWARE_APIS: [&str; 6] = [
    "loadClass",
    "getMessage",
    "getClassLoader",
    "getInputStream",
    "getOutputStream",
    "getPackageInfo",
];
const MALWARE_PERMISSIONS: [&str; 5] = [
    "SEND_SMS",
    "READ_SMS",
    "RECEIVE_SMS",
    "READ_PHONE_STATE",
    "PROCESS_OUTGOING_CALLS",
];
const GOODWARE_PERMISSIONS: [&str; 4] = [
    "INTERNET",
    "ACCESS_NETWORK_STATE",
    "VIBRATE",
    "WAKE_LOCK",
];

/// A corpus of `base_apps` distinct, separable apps, each repeated
/// `duplication` times (1 means no duplicates). Returns matching
/// fingerprints and an API-call feature matrix, joined on app id.
///
/// Distinct apps always have distinct fingerprints and distinct feature
/// vectors; duplicates are exact copies. Labels split the base apps in half.
pub fn inflation_corpus(
    base_apps: usize,
    duplication: usize,
    seed: u64,
) -> (Vec<AppFingerprint>, FeatureMatrix) {
    assert!(base_apps >= 2 && duplication >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feature_names: Vec<&'static str> = FeatureSet::ApiCalls.feature_names();

    let mut base_bits: Vec<Vec<u8>> = Vec::with_capacity(base_apps);
    let mut base_hashes: Vec<Vec<u64>> = Vec::with_capacity(base_apps);
    for i in 0..base_apps {
        let label = base_label(i, base_apps);
        // Resample on the (unlikely) collision so "distinct app" always
        // means distinct features and distinct fingerprint.
        let bits = loop {
            let bits = sample_bits(&feature_names, label, &mut rng);
            if !base_bits.contains(&bits) {
                break bits;
            }
        };
        let hashes = loop {
            let count = rng.gen_range(16..32);
            let hashes: Vec<u64> = (0..count).map(|_| rng.gen()).collect();
            if !base_hashes.contains(&hashes) {
                break hashes;
            }
        };
        base_bits.push(bits);
        base_hashes.push(hashes);
    }

    let mut fingerprints = Vec::new();
    let mut rows = Vec::new();
    for i in 0..base_apps {
        let label = base_label(i, base_apps);
        for copy in 0..duplication {
            let id = if copy == 0 {
                format!("app{i:03}")
            } else {
                format!("app{i:03}_dup{copy}")
            };
            fingerprints.push(AppFingerprint::from_hashes(
                &id,
                label,
                base_hashes[i].iter().copied(),
            ));
            rows.push(FeatureVector {
                app_id: id,
                label,
                bits: base_bits[i].clone(),
            });
        }
    }
    let matrix = build_matrix(
        rows,
        feature_names.iter().map(|s| s.to_string()).collect(),
    )
    .expect("generated ids are unique and rows uniform");
    (fingerprints, matrix)
}

fn base_label(i: usize, base_apps: usize) -> Label {
    if i < base_apps / 2 {
        Label::Malware
    } else {
        Label::Goodware
    }
}

fn sample_bits(feature_names: &[&str], label: Label, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let favored: &[&str] = match label {
        Label::Malware => &MALWARE_APIS,
        _ => &GOODWARE_APIS,
    };
    let unfavored: &[&str] = match label {
        Label::Malware => &GOODWARE_APIS,
        _ => &MALWARE_APIS,
    };
    feature_names
        .iter()
        .map(|name| {
            let p = if favored.contains(name) {
                0.85
            } else if unfavored.contains(name) {
                0.15
            } else {
                0.5
            };
            u8::from(rng.gen_bool(p))
        })
        .collect()
}

/// A labeled fingerprint corpus with organic duplicate structure: roughly a
/// third of the apps are exact copies of earlier ones, the rest draw random
/// subsequence sets from a shared element domain so partial overlaps occur.
pub fn random_fingerprint_corpus(n: usize, seed: u64) -> Vec<AppFingerprint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut corpus: Vec<AppFingerprint> = Vec::with_capacity(n);
    for i in 0..n {
        let label = if rng.gen_bool(0.5) {
            Label::Malware
        } else {
            Label::Goodware
        };
        let id = format!("app{i:04}");
        if i > 0 && rng.gen_bool(0.35) {
            let source = rng.gen_range(0..corpus.len());
            let hashes: Vec<u64> = corpus[source].hashes().to_vec();
            corpus.push(AppFingerprint::from_hashes(&id, label, hashes));
        } else {
            let size = rng.gen_range(3..40);
            let hashes = (0..size).map(|_| rng.gen_range(0..600u64));
            corpus.push(AppFingerprint::from_hashes(&id, label, hashes));
        }
    }
    corpus
}

/// A random labeled binary matrix; both classes are always present.
pub fn random_matrix(rows: usize, features: usize, seed: u64) -> FeatureMatrix {
    assert!(rows >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(rows);
    for i in 0..rows {
        let label = if i == 0 {
            Label::Malware
        } else if i == 1 {
            Label::Goodware
        } else if rng.gen_bool(0.5) {
            Label::Malware
        } else {
            Label::Goodware
        };
        out.push(FeatureVector {
            app_id: format!("r{i}"),
            label,
            bits: (0..features).map(|_| u8::from(rng.gen_bool(0.5))).collect(),
        });
    }
    build_matrix(out, (0..features).map(|f| format!("f{f}")).collect()).unwrap()
}

/// One synthetic app rendered as a full apk bundle.
#[derive(Debug, Clone)]
pub struct SyntheticApp {
    pub id: String,
    pub label: Label,
    pub apk: Vec<u8>,
}

/// Generates whole apk files (manifest plus dex) whose opcode content and
/// feature signal mirror [`inflation_corpus`]: `base_apps` distinct apps,
/// each bundled `duplication` times. Suitable as real pipeline input.
pub fn apk_corpus(base_apps: usize, duplication: usize, seed: u64) -> Vec<SyntheticApp> {
    assert!(base_apps >= 2 && duplication >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Single-unit opcodes only, so any draw forms a valid stream.
    let body_ops: [u8; 10] = [0x01, 0x07, 0x0a, 0x0c, 0x12, 0x1d, 0x21, 0x27, 0x7b, 0xb0];

    let mut out = Vec::new();
    for i in 0..base_apps {
        let label = base_label(i, base_apps);
        let apk = {
            let mut dex = DexBuilder::new();
            let class = format!("Lgen/App{i:03};");
            let methods = rng.gen_range(5..12);
            for m in 0..methods {
                let len = rng.gen_range(3..10);
                let mut units: Vec<u16> = (0..len)
                    .map(|_| {
                        let op = *body_ops.choose(&mut rng).unwrap();
                        u16::from_le_bytes([op, rng.gen_range(0..4) << 4])
                    })
                    .collect();
                units.push(0x000e); // return-void
                dex.method(&class, &format!("m{m}"), "()V", 4, &units);
            }
            let (favored, unfavored): (&[&str], &[&str]) = match label {
                Label::Malware => (&MALWARE_APIS, &GOODWARE_APIS),
                _ => (&GOODWARE_APIS, &MALWARE_APIS),
            };
            for api in favored {
                if rng.gen_bool(0.85) {
                    dex.method_ref("Lext/Api;", api, "()V");
                }
            }
            for api in unfavored {
                if rng.gen_bool(0.15) {
                    dex.method_ref("Lext/Api;", api, "()V");
                }
            }

            let mut manifest_strings = vec!["manifest".to_string()];
            let (fav_perms, unfav_perms): (&[&str], &[&str]) = match label {
                Label::Malware => (&MALWARE_PERMISSIONS, &GOODWARE_PERMISSIONS),
                _ => (&GOODWARE_PERMISSIONS, &MALWARE_PERMISSIONS),
            };
            for p in fav_perms {
                if rng.gen_bool(0.85) {
                    manifest_strings.push(format!("android.permission.{p}"));
                }
            }
            for p in unfav_perms {
                if rng.gen_bool(0.15) {
                    manifest_strings.push(format!("android.permission.{p}"));
                }
            }
            let refs: Vec<&str> = manifest_strings.iter().map(String::as_str).collect();
            let manifest = axml::build_manifest(&refs);

            build_apk(&[
                ("AndroidManifest.xml", &manifest),
                ("classes.dex", &dex.build()),
            ])
        };

        for copy in 0..duplication {
            let id = if copy == 0 {
                format!("app{i:03}")
            } else {
                format!("app{i:03}_dup{copy}")
            };
            out.push(SyntheticApp {
                id,
                label,
                apk: apk.clone(),
            });
        }
    }
    out
}

/// Packs entries into a stored (uncompressed) zip archive.
pub fn build_apk(entries: &[(&str, &[u8])]) -> Vec<u8> {
    use std::io::{Cursor, Write};
    use zip::write::SimpleFileOptions;
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut w = zip::ZipWriter::new(&mut cursor);
        let opts =
            SimpleFileOptions::default().compression_method(zip::CompressionMethod::Stored);
        for (name, data) in entries {
            w.start_file(*name, opts).expect("in-memory zip write");
            w.write_all(data).expect("in-memory zip write");
        }
        w.finish().expect("in-memory zip write");
    }
    cursor.into_inner()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster;
    use crate::dalvik;
    use crate::features;
    use crate::fingerprint::fingerprint_of;

    #[test]
    fn inflation_corpus_has_expected_duplicate_structure() {
        let (corpus, matrix) = inflation_corpus(10, 3, 42);
        assert_eq!(corpus.len(), 30);
        assert_eq!(matrix.rows.len(), 30);
        let groups = cluster::dedup_at_zero(&corpus).unwrap();
        assert_eq!(groups.cluster_count(), 10);
        for c in &groups.clusters {
            assert_eq!(c.members.len(), 3);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let (a_fp, a_m) = inflation_corpus(8, 2, 7);
        let (b_fp, b_m) = inflation_corpus(8, 2, 7);
        assert_eq!(a_fp, b_fp);
        assert_eq!(a_m, b_m);
    }

    #[test]
    fn apk_corpus_round_trips_through_extraction() {
        let apps = apk_corpus(4, 2, 11);
        assert_eq!(apps.len(), 8);
        let mut fps = Vec::new();
        for app in &apps {
            let ex = dalvik::extract_from_apk(&app.apk, &app.id).unwrap();
            assert!(ex.report.parse_warnings.is_empty(), "{:?}", ex.report);
            fps.push(fingerprint_of(&ex.sequences, &app.id, app.label).unwrap());
        }
        let groups = cluster::dedup_at_zero(&fps).unwrap();
        assert_eq!(groups.cluster_count(), 4);

        // Labels drive the feature signal: a malware app should usually set
        // more malware-API bits than goodware ones. Just check parse paths.
        let f = features::features_in_apk(&apps[0].apk).unwrap();
        assert!(!f.permissions.is_empty() || !f.api_calls.is_empty());
    }
}
