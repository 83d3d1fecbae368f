//! Binary permission and API-call features over the fixed catalogs.
//!
//! An app's feature vector records, per catalog entry, whether the app
//! references that name anywhere. API calls match on the simple method name
//! in the dex method-reference pool (the catalog lists bare names like
//! `exec`, so matching carries no class context and over-approximates);
//! permissions match `android.permission.<NAME>` tokens in the manifest
//! string pool. Extraction is deterministic and monotone: adding a reference
//! never clears a bit.

pub mod axml;
pub mod catalog;

use std::collections::BTreeSet;

pub use catalog::{FeatureSet, API_CALLS, PERMISSIONS};

use crate::dalvik;
use crate::error::{Error, Result};
use crate::fingerprint::Label;

/// Names an app was found to reference, split by kind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AppFeatures {
    pub permissions: BTreeSet<String>,
    pub api_calls: BTreeSet<String>,
}

impl AppFeatures {
    /// Renders the presence bits over a catalog subset.
    pub fn vector(&self, set: FeatureSet, app_id: &str, label: Label) -> FeatureVector {
        let bits = set
            .feature_names()
            .iter()
            .map(|name| {
                u8::from(self.permissions.contains(*name) || self.api_calls.contains(*name))
            })
            .collect();
        FeatureVector {
            app_id: app_id.to_string(),
            label,
            bits,
        }
    }
}

/// API-call catalog entries whose simple name appears in `method_names`.
/// Matching is exact and case-sensitive.
pub fn api_calls_in_names<S: AsRef<str>>(method_names: &[S]) -> BTreeSet<String> {
    let present: BTreeSet<&str> = method_names.iter().map(AsRef::as_ref).collect();
    API_CALLS
        .iter()
        .filter(|name| present.contains(**name))
        .map(|name| name.to_string())
        .collect()
}

/// API-call features straight from a dex file's method-reference pool.
pub fn api_calls_in_dex(dex_bytes: &[u8]) -> Result<BTreeSet<String>> {
    let names = dalvik::referenced_method_names(dex_bytes)?;
    Ok(api_calls_in_names(&names))
}

/// Permission catalog entries present in a list of permission strings.
/// Accepts bare names and fully qualified `android.permission.*` tokens.
pub fn permissions_in_strings<S: AsRef<str>>(strings: &[S]) -> BTreeSet<String> {
    let mut present = BTreeSet::new();
    for s in strings {
        let name = s
            .as_ref()
            .strip_prefix("android.permission.")
            .unwrap_or(s.as_ref());
        if PERMISSIONS.contains(&name) {
            present.insert(name.to_string());
        }
    }
    present
}

/// Permission features from a compiled `AndroidManifest.xml`.
pub fn permissions_in_manifest(axml_bytes: &[u8]) -> Result<BTreeSet<String>> {
    let pool = axml::string_pool(axml_bytes)?;
    let qualified: Vec<&String> = pool
        .iter()
        .filter(|s| s.starts_with("android.permission."))
        .collect();
    Ok(permissions_in_strings(&qualified))
}

/// Extracts both feature kinds from an apk: permissions from the manifest
/// entry, API calls from every `classes*.dex` entry.
pub fn features_in_apk(apk_bytes: &[u8]) -> Result<AppFeatures> {
    let manifest = dalvik::apk::read_zip_entry(apk_bytes, "AndroidManifest.xml")?
        .ok_or(Error::NoManifest)?;
    let permissions = permissions_in_manifest(&manifest)?;

    let mut api_calls = BTreeSet::new();
    for n in 1.. {
        let name = if n == 1 {
            "classes.dex".to_string()
        } else {
            format!("classes{n}.dex")
        };
        match dalvik::apk::read_zip_entry(apk_bytes, &name)? {
            Some(dex) => api_calls.extend(api_calls_in_dex(&dex)?),
            None => break,
        }
    }
    Ok(AppFeatures {
        permissions,
        api_calls,
    })
}

/// One labeled row of presence bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub app_id: String,
    pub label: Label,
    pub bits: Vec<u8>,
}

/// A labeled binary matrix over one catalog subset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub rows: Vec<FeatureVector>,
}

impl FeatureMatrix {
    pub fn width(&self) -> usize {
        self.feature_names.len()
    }

    /// Equality of the classifier-visible content: names, bits and labels.
    /// Row ids are bookkeeping and the CSV format does not carry them.
    pub fn content_eq(&self, other: &FeatureMatrix) -> bool {
        self.feature_names == other.feature_names
            && self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.bits == b.bits && a.label == b.label)
    }

    /// Restricts the matrix to rows whose id passes the predicate,
    /// preserving order.
    pub fn select<F: Fn(&str) -> bool>(&self, keep: F) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            rows: self
                .rows
                .iter()
                .filter(|r| keep(&r.app_id))
                .cloned()
                .collect(),
        }
    }
}

/// Assembles rows into a matrix, enforcing uniform width and unique ids.
pub fn build_matrix(rows: Vec<FeatureVector>, feature_names: Vec<String>) -> Result<FeatureMatrix> {
    let width = feature_names.len();
    let mut seen = BTreeSet::new();
    for row in &rows {
        if row.bits.len() != width {
            return Err(Error::WidthMismatch {
                app_id: row.app_id.clone(),
                got: row.bits.len(),
                expected: width,
            });
        }
        if !seen.insert(row.app_id.clone()) {
            return Err(Error::DuplicateAppId(row.app_id.clone()));
        }
    }
    Ok(FeatureMatrix {
        feature_names,
        rows,
    })
}

/// Serializes to the interchange CSV: `<feature1>,...,<featureK>,label`,
/// bits as `0`/`1`.
pub fn write_csv(matrix: &FeatureMatrix) -> String {
    let mut out = String::new();
    out.push_str(&matrix.feature_names.join(","));
    out.push_str(",label\n");
    for row in &matrix.rows {
        for bit in &row.bits {
            out.push_str(if *bit == 0 { "0," } else { "1," });
        }
        out.push_str(&row.label.to_string());
        out.push('\n');
    }
    out
}

/// Parses the interchange CSV. Row ids are synthesized (`row0`, `row1`, ...)
/// because the format intentionally carries no identifiers.
pub fn read_csv(text: &str) -> Result<FeatureMatrix> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::CsvParseError {
        line: 1,
        reason: "empty file".to_string(),
    })?;
    let mut names: Vec<String> = header.split(',').map(str::to_string).collect();
    match names.pop() {
        Some(last) if last == "label" => {}
        _ => {
            return Err(Error::CsvParseError {
                line: 1,
                reason: "header must end with `label`".to_string(),
            })
        }
    }

    let mut rows: Vec<FeatureVector> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() + 1 {
            return Err(Error::CsvParseError {
                line: line_no,
                reason: format!(
                    "expected {} fields, found {}",
                    names.len() + 1,
                    fields.len()
                ),
            });
        }
        let mut bits = Vec::with_capacity(names.len());
        for f in &fields[..names.len()] {
            bits.push(match *f {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::CsvParseError {
                        line: line_no,
                        reason: format!("bit field `{other}` is not 0 or 1"),
                    })
                }
            });
        }
        let label: Label = fields[names.len()]
            .parse()
            .map_err(|e| Error::CsvParseError {
                line: line_no,
                reason: e,
            })?;
        rows.push(FeatureVector {
            app_id: format!("row{}", rows.len()),
            label,
            bits,
        });
    }
    Ok(FeatureMatrix {
        feature_names: names,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn api_bits_from_a_name_list() {
        let names = vec![
            "getDeviceId".to_string(),
            "exec".to_string(),
            "jpeg".to_string(),
        ];
        let present = api_calls_in_names(&names);
        assert_eq!(present.len(), 2);
        let v = AppFeatures {
            api_calls: present,
            ..Default::default()
        }
        .vector(FeatureSet::ApiCalls, "a", Label::Malware);
        let on: Vec<&str> = FeatureSet::ApiCalls
            .feature_names()
            .iter()
            .zip(&v.bits)
            .filter(|(_, &b)| b == 1)
            .map(|(n, _)| *n)
            .collect();
        assert_eq!(on, vec!["getDeviceId", "exec"]);
    }

    #[test]
    fn api_matching_is_case_sensitive() {
        let names = vec![
            "sendtextmessage".to_string(),
            "SendTextMessage".to_string(),
        ];
        assert!(api_calls_in_names(&names).is_empty());
    }

    #[test]
    fn sendtextmessage_reference_sets_its_bit() {
        use crate::dalvik::builder::DexBuilder;
        let mut b = DexBuilder::new();
        b.method("Lfix/A;", "go", "()V", 1, &[0x000e]);
        b.method_ref("Landroid/telephony/SmsManager;", "sendTextMessage", "()V");
        let present = api_calls_in_dex(&b.build()).unwrap();
        assert!(present.contains("sendTextMessage"));
    }

    #[test]
    fn dex_without_catalog_names_gives_zero_vector() {
        use crate::dalvik::builder::DexBuilder;
        let mut b = DexBuilder::new();
        b.method("Lfix/A;", "go", "()V", 1, &[0x000e]);
        let features = AppFeatures {
            api_calls: api_calls_in_dex(&b.build()).unwrap(),
            ..Default::default()
        };
        let v = features.vector(FeatureSet::ApiCalls, "a", Label::Goodware);
        assert!(v.bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn permission_bits_from_manifest_strings() {
        let strings = vec![
            "android.permission.SEND_SMS".to_string(),
            "android.permission.FOO_BAR".to_string(),
        ];
        let present = permissions_in_strings(&strings);
        assert_eq!(present.len(), 1);
        assert!(present.contains("SEND_SMS"));
    }

    #[test]
    fn bare_permission_names_also_match() {
        let strings = vec![
            "READ_SMS".to_string(),
            "INTERNET".to_string(),
            "FOO_BAR".to_string(),
        ];
        let present = permissions_in_strings(&strings);
        assert_eq!(present.len(), 2);
        assert!(present.contains("READ_SMS") && present.contains("INTERNET"));
    }

    #[test]
    fn manifest_scan_finds_declared_permissions() {
        let bytes = axml::build_manifest(&[
            "manifest",
            "android.permission.SEND_SMS",
            "android.permission.READ_PHONE_STATE",
            "not.a.permission",
        ]);
        let present = permissions_in_manifest(&bytes).unwrap();
        assert_eq!(present.len(), 2);
    }

    #[test]
    fn empty_permission_list_gives_zero_vector() {
        let v = AppFeatures::default().vector(FeatureSet::Permissions, "a", Label::Goodware);
        assert_eq!(v.bits.len(), 44);
        assert!(v.bits.iter().all(|&b| b == 0));
    }

    #[test]
    fn extraction_is_monotone() {
        let base = vec!["READ_SMS".to_string()];
        let more = vec!["READ_SMS".to_string(), "INTERNET".to_string()];
        let fewer_bits = AppFeatures {
            permissions: permissions_in_strings(&base),
            ..Default::default()
        }
        .vector(FeatureSet::Permissions, "a", Label::Malware);
        let more_bits = AppFeatures {
            permissions: permissions_in_strings(&more),
            ..Default::default()
        }
        .vector(FeatureSet::Permissions, "a", Label::Malware);
        for (a, b) in fewer_bits.bits.iter().zip(&more_bits.bits) {
            assert!(b >= a);
        }
    }

    #[test]
    fn csv_round_trip_preserves_content() {
        let names: Vec<String> = FeatureSet::Permissions
            .feature_names()
            .iter()
            .map(|s| s.to_string())
            .collect();
        let rows = vec![
            FeatureVector {
                app_id: "m1".into(),
                label: Label::Malware,
                bits: (0..names.len()).map(|i| (i % 3 == 0) as u8).collect(),
            },
            FeatureVector {
                app_id: "g1".into(),
                label: Label::Goodware,
                bits: vec![0; names.len()],
            },
        ];
        let matrix = build_matrix(rows, names).unwrap();
        let text = write_csv(&matrix);
        // 44 deduplicated permission columns plus the label column
        assert_eq!(text.lines().next().unwrap().split(',').count(), 45);
        let back = read_csv(&text).unwrap();
        assert!(matrix.content_eq(&back));
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "A,B,label\n0,1,malware\n0,2,goodware\n";
        match read_csv(text).unwrap_err() {
            Error::CsvParseError { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn matrix_rejects_ragged_rows_and_duplicate_ids() {
        let names = vec!["A".to_string(), "B".to_string()];
        let short = FeatureVector {
            app_id: "x".into(),
            label: Label::Malware,
            bits: vec![1],
        };
        assert!(matches!(
            build_matrix(vec![short], names.clone()).unwrap_err(),
            Error::WidthMismatch { .. }
        ));
        let a = FeatureVector {
            app_id: "x".into(),
            label: Label::Malware,
            bits: vec![1, 0],
        };
        let b = FeatureVector {
            app_id: "x".into(),
            label: Label::Goodware,
            bits: vec![0, 0],
        };
        assert!(matches!(
            build_matrix(vec![a, b], names).unwrap_err(),
            Error::DuplicateAppId(_)
        ));
    }
}
