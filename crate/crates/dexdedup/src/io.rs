//! Interchange formats: JSON Lines for per-app records, JSON for reports,
//! CSV for sweep curves. Everything is written in a canonical order
//! (sorted digests, stable field order) so identical runs produce identical
//! bytes.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cluster::{Cluster, ClusterSet, SelectionMode};
use crate::dalvik::{Extraction, OpcodeSequence};
use crate::error::{Error, Result};
use crate::fingerprint::{AppFingerprint, Label};
use crate::mleval::{EvalReport, InfoGainReport};

/// One method in an extraction record.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MethodRecord {
    pub id: String,
    pub opcodes: Vec<u8>,
}

/// One app in extraction JSONL: `{"app_id": ..., "methods": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ExtractRecord {
    pub app_id: String,
    pub methods: Vec<MethodRecord>,
}

impl ExtractRecord {
    pub fn from_extraction(extraction: &Extraction) -> ExtractRecord {
        ExtractRecord {
            app_id: extraction.report.app_id.clone(),
            methods: extraction
                .sequences
                .iter()
                .map(|s| MethodRecord {
                    id: s.method_id.clone(),
                    opcodes: s.opcodes.clone(),
                })
                .collect(),
        }
    }

    pub fn sequences(&self) -> Vec<OpcodeSequence> {
        self.methods
            .iter()
            .map(|m| OpcodeSequence {
                method_id: m.id.clone(),
                opcodes: m.opcodes.clone(),
            })
            .collect()
    }
}

/// One app in fingerprint JSONL:
/// `{"app_id": ..., "label": ..., "hashes": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct FingerprintRecord {
    pub app_id: String,
    pub label: Label,
    pub hashes: Vec<u64>,
}

impl From<&AppFingerprint> for FingerprintRecord {
    fn from(fp: &AppFingerprint) -> FingerprintRecord {
        FingerprintRecord {
            app_id: fp.app_id.clone(),
            label: fp.label,
            hashes: fp.hashes().to_vec(),
        }
    }
}

impl From<FingerprintRecord> for AppFingerprint {
    fn from(rec: FingerprintRecord) -> AppFingerprint {
        AppFingerprint::from_hashes(rec.app_id, rec.label, rec.hashes)
    }
}

/// Cluster report JSON.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClusterReport {
    pub epsilon: f64,
    pub seed: Option<u64>,
    pub ordered: bool,
    pub clusters: Vec<ClusterEntry>,
    pub cluster_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct ClusterEntry {
    pub centroid: String,
    pub members: Vec<String>,
}

impl From<&ClusterSet> for ClusterReport {
    fn from(set: &ClusterSet) -> ClusterReport {
        ClusterReport {
            epsilon: set.epsilon,
            seed: set.mode.seed(),
            ordered: set.mode == SelectionMode::Ordered,
            cluster_count: set.cluster_count(),
            clusters: set
                .clusters
                .iter()
                .map(|c| ClusterEntry {
                    centroid: c.centroid.clone(),
                    members: c.members.clone(),
                })
                .collect(),
        }
    }
}

impl From<&ClusterReport> for ClusterSet {
    fn from(report: &ClusterReport) -> ClusterSet {
        ClusterSet {
            epsilon: report.epsilon,
            mode: match (report.ordered, report.seed) {
                (true, _) | (false, None) => SelectionMode::Ordered,
                (false, Some(s)) => SelectionMode::Seeded(s),
            },
            clusters: report
                .clusters
                .iter()
                .map(|c| Cluster {
                    centroid: c.centroid.clone(),
                    members: c.members.clone(),
                })
                .collect(),
        }
    }
}

/// A full experiment report: evaluation plus the information-gain ranking of
/// the matrix it ran on.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentReport {
    #[serde(flatten)]
    pub eval: EvalReport,
    pub info_gain: Vec<InfoGainEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct InfoGainEntry {
    pub feature: String,
    pub gain: f64,
}

impl From<&InfoGainReport> for Vec<InfoGainEntry> {
    fn from(report: &InfoGainReport) -> Vec<InfoGainEntry> {
        report
            .entries
            .iter()
            .map(|(feature, gain)| InfoGainEntry {
                feature: feature.clone(),
                gain: *gain,
            })
            .collect()
    }
}

/// Writes items as JSON Lines.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    for item in items {
        serde_json::to_writer(&mut file, item)?;
        file.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads JSON Lines, one item per non-empty line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path)?;
    let mut items = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::CsvParseError {
            line: idx + 1,
            reason: format!("jsonl: {e}"),
        })?;
        items.push(item);
    }
    Ok(items)
}

pub fn read_fingerprints(path: &Path) -> Result<Vec<AppFingerprint>> {
    let records: Vec<FingerprintRecord> = read_jsonl(path)?;
    Ok(records.into_iter().map(AppFingerprint::from).collect())
}

pub fn write_fingerprints(path: &Path, corpus: &[AppFingerprint]) -> Result<()> {
    let records: Vec<FingerprintRecord> = corpus.iter().map(FingerprintRecord::from).collect();
    write_jsonl(path, &records)
}

/// `epsilon,cluster_count` rows for the sweep curve.
pub fn sweep_csv(counts: &[(f64, usize)]) -> String {
    let mut out = String::from("epsilon,cluster_count\n");
    for (eps, count) in counts {
        out.push_str(&format!("{eps},{count}\n"));
    }
    out
}

/// Pretty JSON with a trailing newline, the shape all report files share.
pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::Label;

    #[test]
    fn fingerprint_jsonl_round_trips() {
        let dir = std::env::temp_dir().join(format!("dexdedup-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("fp.jsonl");
        let corpus = vec![
            AppFingerprint::from_hashes("a", Label::Malware, [3u64, 1, 2]),
            AppFingerprint::from_hashes("b", Label::Goodware, [9u64]),
        ];
        write_fingerprints(&path, &corpus).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(r#"{"app_id":"a","label":"malware","hashes":[1,2,3]}"#));
        let back = read_fingerprints(&path).unwrap();
        assert_eq!(corpus, back);
        fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn extraction_record_field_names_are_stable() {
        let rec = ExtractRecord {
            app_id: "x".into(),
            methods: vec![MethodRecord {
                id: "La;->m()V".into(),
                opcodes: vec![18, 15],
            }],
        };
        let json = serde_json::to_string(&rec).unwrap();
        assert_eq!(
            json,
            r#"{"app_id":"x","methods":[{"id":"La;->m()V","opcodes":[18,15]}]}"#
        );
    }

    #[test]
    fn sweep_csv_layout() {
        let csv = sweep_csv(&[(0.0, 10), (0.5, 3)]);
        assert_eq!(csv, "epsilon,cluster_count\n0,10\n0.5,3\n");
    }
}
