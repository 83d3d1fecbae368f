//! Binary `AndroidManifest.xml` string pool access.
//!
//! Permission detection scans the compiled manifest's string pool for
//! `android.permission.*` tokens instead of reconstructing the XML tree.
//! This over-approximates (any string constant naming a permission counts)
//! but is robust against the malformed attribute blocks common in old
//! malware. Full tree parsing is a natural extension point if attribute-level
//! precision is ever needed.

use crate::error::{Error, Result};

const RES_XML_TYPE: u16 = 0x0003;
const RES_STRING_POOL_TYPE: u16 = 0x0001;
const UTF8_FLAG: u32 = 1 << 8;

/// Decodes every string in the first string pool chunk of a binary XML file.
pub fn string_pool(axml: &[u8]) -> Result<Vec<String>> {
    let doc_type = read_u16(axml, 0)?;
    if doc_type != RES_XML_TYPE {
        return Err(Error::MalformedManifest(format!(
            "not a binary xml document (type {doc_type:#x})"
        )));
    }
    let doc_size = read_u32(axml, 4)? as usize;
    let mut pos = read_u16(axml, 2)? as usize; // header size
    while pos + 8 <= axml.len().min(doc_size) {
        let chunk_type = read_u16(axml, pos)?;
        let chunk_size = read_u32(axml, pos + 4)? as usize;
        if chunk_size < 8 {
            return Err(Error::MalformedManifest("chunk size below header".into()));
        }
        if chunk_type == RES_STRING_POOL_TYPE {
            return parse_string_pool(axml, pos, chunk_size);
        }
        pos += chunk_size;
    }
    Err(Error::MalformedManifest("no string pool chunk".into()))
}

fn parse_string_pool(axml: &[u8], base: usize, chunk_size: usize) -> Result<Vec<String>> {
    let count = read_u32(axml, base + 8)? as usize;
    let flags = read_u32(axml, base + 16)?;
    let strings_start = read_u32(axml, base + 20)? as usize;
    let utf8 = flags & UTF8_FLAG != 0;

    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let rel = read_u32(axml, base + 28 + 4 * i)? as usize;
        let off = base + strings_start + rel;
        if off >= base + chunk_size {
            return Err(Error::MalformedManifest(format!(
                "string {i} offset outside pool"
            )));
        }
        out.push(if utf8 {
            read_utf8_string(axml, off)?
        } else {
            read_utf16_string(axml, off)?
        });
    }
    Ok(out)
}

fn read_utf16_string(axml: &[u8], off: usize) -> Result<String> {
    let mut pos = off;
    let mut len = read_u16(axml, pos)? as usize;
    pos += 2;
    if len & 0x8000 != 0 {
        len = ((len & 0x7fff) << 16) | read_u16(axml, pos)? as usize;
        pos += 2;
    }
    let mut units = Vec::with_capacity(len);
    for _ in 0..len {
        units.push(read_u16(axml, pos)?);
        pos += 2;
    }
    Ok(String::from_utf16_lossy(&units))
}

fn read_utf8_string(axml: &[u8], off: usize) -> Result<String> {
    let mut pos = off;
    // utf16 length (skipped), then byte length; both use a high-bit extension
    let b = read_u8(axml, pos)?;
    pos += if b & 0x80 != 0 { 2 } else { 1 };
    let mut byte_len = read_u8(axml, pos)? as usize;
    pos += 1;
    if byte_len & 0x80 != 0 {
        byte_len = ((byte_len & 0x7f) << 8) | read_u8(axml, pos)? as usize;
        pos += 1;
    }
    let data = axml
        .get(pos..pos + byte_len)
        .ok_or_else(|| Error::MalformedManifest("utf8 string overruns pool".into()))?;
    Ok(String::from_utf8_lossy(data).into_owned())
}

fn read_u8(bytes: &[u8], off: usize) -> Result<u8> {
    bytes
        .get(off)
        .copied()
        .ok_or_else(|| Error::MalformedManifest(format!("truncated at offset {off:#x}")))
}

fn read_u16(bytes: &[u8], off: usize) -> Result<u16> {
    let b = bytes
        .get(off..off + 2)
        .ok_or_else(|| Error::MalformedManifest(format!("truncated at offset {off:#x}")))?;
    Ok(u16::from_le_bytes([b[0], b[1]]))
}

fn read_u32(bytes: &[u8], off: usize) -> Result<u32> {
    let b = bytes
        .get(off..off + 4)
        .ok_or_else(|| Error::MalformedManifest(format!("truncated at offset {off:#x}")))?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

/// Builds a minimal binary manifest whose string pool holds the given
/// strings (UTF-16 layout). Enough structure for the scanner and for fixture
/// archives; not a complete manifest encoder.
pub fn build_manifest(strings: &[&str]) -> Vec<u8> {
    let mut offsets = Vec::with_capacity(strings.len());
    let mut data: Vec<u8> = Vec::new();
    for s in strings {
        offsets.push(data.len() as u32);
        let units: Vec<u16> = s.encode_utf16().collect();
        data.extend_from_slice(&(units.len() as u16).to_le_bytes());
        for u in &units {
            data.extend_from_slice(&u.to_le_bytes());
        }
        data.extend_from_slice(&0u16.to_le_bytes());
    }
    while data.len() % 4 != 0 {
        data.push(0);
    }

    let strings_start = 28 + 4 * strings.len();
    let pool_size = strings_start + data.len();
    let doc_size = 8 + pool_size;

    let mut out = Vec::with_capacity(doc_size);
    out.extend_from_slice(&RES_XML_TYPE.to_le_bytes());
    out.extend_from_slice(&8u16.to_le_bytes());
    out.extend_from_slice(&(doc_size as u32).to_le_bytes());

    out.extend_from_slice(&RES_STRING_POOL_TYPE.to_le_bytes());
    out.extend_from_slice(&28u16.to_le_bytes());
    out.extend_from_slice(&(pool_size as u32).to_le_bytes());
    out.extend_from_slice(&(strings.len() as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // styleCount
    out.extend_from_slice(&0u32.to_le_bytes()); // flags: UTF-16
    out.extend_from_slice(&(strings_start as u32).to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // stylesStart
    for off in offsets {
        out.extend_from_slice(&off.to_le_bytes());
    }
    out.extend_from_slice(&data);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_the_scanner() {
        let strings = ["manifest", "android.permission.SEND_SMS", "uses-permission"];
        let bytes = build_manifest(&strings);
        let pool = string_pool(&bytes).unwrap();
        assert_eq!(pool, strings);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(matches!(
            string_pool(b"plain text file"),
            Err(Error::MalformedManifest(_))
        ));
        assert!(string_pool(&[]).is_err());
    }
}
