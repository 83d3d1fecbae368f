//! Extraction from apk/zip containers.

use std::io::{Cursor, Read};

use super::{dex, Extraction, ExtractionReport};
use crate::error::{Error, Result};

/// Extracts from every `classes*.dex` entry, concatenated in entry-name
/// lexicographic order so multi-dex apps fingerprint reproducibly.
pub fn extract_from_apk(bytes: &[u8], app_id: &str) -> Result<Extraction> {
    let entries = dex_entries(bytes)?;
    if entries.is_empty() {
        return Err(Error::NoDexEntries);
    }

    let mut report = ExtractionReport {
        app_id: app_id.to_string(),
        ..Default::default()
    };
    let mut sequences = Vec::new();
    for (name, data) in entries {
        match dex::extract_from_dex(&data, app_id) {
            Ok(mut ex) => {
                sequences.append(&mut ex.sequences);
                report.skipped_methods += ex.report.skipped_methods;
                report
                    .parse_warnings
                    .extend(ex.report.parse_warnings.into_iter().map(|w| format!("{name}: {w}")));
            }
            Err(err) => report.parse_warnings.push(format!("{name}: {err}")),
        }
    }
    report.method_count = sequences.len();
    Ok(Extraction { sequences, report })
}

/// Reads one named entry out of a zip container.
pub fn read_zip_entry(bytes: &[u8], entry: &str) -> Result<Option<Vec<u8>>> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| Error::MalformedArchive(e.to_string()))?;
    let mut file = match archive.by_name(entry) {
        Ok(file) => file,
        Err(zip::result::ZipError::FileNotFound) => return Ok(None),
        Err(e) => return Err(Error::MalformedArchive(e.to_string())),
    };
    let mut data = Vec::new();
    file.read_to_end(&mut data)?;
    Ok(Some(data))
}

fn dex_entries(bytes: &[u8]) -> Result<Vec<(String, Vec<u8>)>> {
    let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
        .map_err(|e| Error::MalformedArchive(e.to_string()))?;
    let mut names: Vec<String> = archive
        .file_names()
        .filter(|n| is_classes_dex(n))
        .map(str::to_string)
        .collect();
    names.sort();

    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let mut file = archive
            .by_name(&name)
            .map_err(|e| Error::MalformedArchive(e.to_string()))?;
        let mut data = Vec::new();
        file.read_to_end(&mut data)?;
        out.push((name, data));
    }
    Ok(out)
}

fn is_classes_dex(name: &str) -> bool {
    let Some(middle) = name
        .strip_prefix("classes")
        .and_then(|rest| rest.strip_suffix(".dex"))
    else {
        return false;
    };
    !name.contains('/') && middle.chars().all(|c| c.is_ascii_digit())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dalvik::builder::DexBuilder;
    use std::io::Write;
    use zip::write::SimpleFileOptions;

    pub(crate) fn zip_with(entries: &[(&str, &[u8])]) -> Vec<u8> {
        let mut cursor = Cursor::new(Vec::new());
        {
            let mut w = zip::ZipWriter::new(&mut cursor);
            let opts =
                SimpleFileOptions::default().compression_method(zip::CompressionMethod::Stored);
            for (name, data) in entries {
                w.start_file(*name, opts).unwrap();
                w.write_all(data).unwrap();
            }
            w.finish().unwrap();
        }
        cursor.into_inner()
    }

    fn tiny_dex(opcode_units: &[u16]) -> Vec<u8> {
        let mut b = DexBuilder::new();
        b.method("Lfix/A;", "go", "()V", 1, opcode_units);
        b.build()
    }

    #[test]
    fn classes_dex_name_filter() {
        assert!(is_classes_dex("classes.dex"));
        assert!(is_classes_dex("classes2.dex"));
        assert!(is_classes_dex("classes10.dex"));
        assert!(!is_classes_dex("lib/classes.dex"));
        assert!(!is_classes_dex("resources.arsc"));
        assert!(!is_classes_dex("classesX.dex"));
    }

    #[test]
    fn multidex_entries_concatenate_in_name_order() {
        // Insert out of order; extraction must still be classes.dex first.
        let dex1 = tiny_dex(&[0x0012, 0x000e]);
        let dex2 = tiny_dex(&[0x000e]);
        let apk = zip_with(&[("classes2.dex", &dex2[..]), ("classes.dex", &dex1[..])]);
        let ex = extract_from_apk(&apk, "app").unwrap();
        assert_eq!(ex.sequences.len(), 2);
        assert_eq!(ex.sequences[0].opcodes, vec![0x12, 0x0e]);
        assert_eq!(ex.sequences[1].opcodes, vec![0x0e]);
    }

    #[test]
    fn zip_without_dex_is_an_error() {
        let apk = zip_with(&[("assets/readme.txt", b"hi".as_slice())]);
        assert!(matches!(
            extract_from_apk(&apk, "app").unwrap_err(),
            Error::NoDexEntries
        ));
    }

    #[test]
    fn zip_matches_direct_extraction() {
        let dex = tiny_dex(&[0x0012, 0x000e]);
        let apk = zip_with(&[("classes.dex", &dex[..])]);
        let direct = dex::extract_from_dex(&dex, "app").unwrap();
        let via_zip = extract_from_apk(&apk, "app").unwrap();
        assert_eq!(direct.sequences, via_zip.sequences);
    }

    #[test]
    fn corrupt_dex_entry_becomes_a_warning() {
        let good = tiny_dex(&[0x000e]);
        let apk = zip_with(&[
            ("classes.dex", &good[..]),
            ("classes2.dex", b"not a dex".as_slice()),
        ]);
        let ex = extract_from_apk(&apk, "app").unwrap();
        assert_eq!(ex.sequences.len(), 1);
        assert!(ex.report.parse_warnings.iter().any(|w| w.contains("classes2.dex")));
    }
}
