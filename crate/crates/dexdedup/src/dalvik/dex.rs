//! Parser for the dex container format.
//!
//! Only the pieces needed for opcode extraction and method-reference listing
//! are read: the header, the string/type/proto/method id pools, class
//! definitions, and code items. Every read is bounds-checked against the
//! input; a structurally broken file fails with the offending offset, while a
//! broken individual method or class only produces a report warning.

use super::opcode::Opcode;
use super::{Extraction, ExtractionReport, OpcodeSequence};
use crate::error::{Error, Result};

pub const DEX_MAGIC: &[u8; 4] = b"dex\n";
const ENDIAN_CONSTANT: u32 = 0x1234_5678;
const NO_INDEX: u32 = 0xffff_ffff;

const PACKED_SWITCH_PAYLOAD: u8 = 0x01;
const SPARSE_SWITCH_PAYLOAD: u8 = 0x02;
const FILL_ARRAY_DATA_PAYLOAD: u8 = 0x03;

/// Extracts one opcode sequence per method with a non-empty code item.
pub fn extract_from_dex(bytes: &[u8], app_id: &str) -> Result<Extraction> {
    let dex = Dex::parse(bytes)?;
    let mut report = ExtractionReport {
        app_id: app_id.to_string(),
        ..Default::default()
    };
    if !dex.checksum_ok {
        report
            .parse_warnings
            .push("header checksum does not match file contents".to_string());
    }

    let mut sequences = Vec::new();
    for class_index in 0..dex.class_defs.len() {
        match dex.class_methods(class_index) {
            Ok(methods) => {
                for m in methods {
                    match dex.method_sequence(&m) {
                        Ok(Some(seq)) => sequences.push(seq),
                        Ok(None) => {} // abstract/native or empty body
                        Err(err) => {
                            report.skipped_methods += 1;
                            report.parse_warnings.push(format!(
                                "method {}: {err}",
                                dex.method_descriptor(m.method_idx)
                                    .unwrap_or_else(|_| format!("#{}", m.method_idx))
                            ));
                        }
                    }
                }
            }
            Err(err) => {
                report
                    .parse_warnings
                    .push(format!("class #{class_index}: {err}"));
            }
        }
    }
    report.method_count = sequences.len();
    Ok(Extraction { sequences, report })
}

/// Lists the simple names of every entry in the method-id pool.
///
/// This is the method *reference* table: it covers both methods defined in
/// the file and external API methods it invokes.
pub fn referenced_method_names(bytes: &[u8]) -> Result<Vec<String>> {
    let dex = Dex::parse(bytes)?;
    let mut names = Vec::with_capacity(dex.method_ids.len());
    for m in &dex.method_ids {
        names.push(dex.string(m.name_idx)?);
    }
    Ok(names)
}

struct MethodRef {
    method_idx: u32,
    code_off: usize,
}

struct ProtoId {
    return_type_idx: u32,
    parameters_off: u32,
}

struct MethodId {
    class_idx: u16,
    proto_idx: u16,
    name_idx: u32,
}

struct ClassDef {
    class_idx: u32,
    class_data_off: u32,
}

pub(crate) struct Dex<'a> {
    bytes: &'a [u8],
    checksum_ok: bool,
    string_offsets: Vec<u32>,
    type_desc_idx: Vec<u32>,
    protos: Vec<ProtoId>,
    method_ids: Vec<MethodId>,
    class_defs: Vec<ClassDef>,
}

impl<'a> Dex<'a> {
    pub(crate) fn parse(bytes: &'a [u8]) -> Result<Dex<'a>> {
        let r = Reader { bytes };
        if bytes.len() < 0x70 {
            return Err(malformed(0, "file shorter than the 0x70-byte header"));
        }
        if &bytes[0..4] != DEX_MAGIC {
            return Err(malformed(0, "missing dex magic"));
        }
        if bytes[7] != 0 || !bytes[4..7].iter().all(u8::is_ascii_digit) {
            return Err(malformed(4, "malformed dex version"));
        }
        let checksum = r.u32(0x08)?;
        let checksum_ok = adler32(&bytes[12..]) == checksum;
        let endian_tag = r.u32(0x28)?;
        if endian_tag != ENDIAN_CONSTANT {
            return Err(malformed(0x28, "unsupported endianness tag"));
        }

        let string_ids_size = r.u32(0x38)? as usize;
        let string_ids_off = r.u32(0x3C)? as usize;
        let type_ids_size = r.u32(0x40)? as usize;
        let type_ids_off = r.u32(0x44)? as usize;
        let proto_ids_size = r.u32(0x48)? as usize;
        let proto_ids_off = r.u32(0x4C)? as usize;
        let method_ids_size = r.u32(0x58)? as usize;
        let method_ids_off = r.u32(0x5C)? as usize;
        let class_defs_size = r.u32(0x60)? as usize;
        let class_defs_off = r.u32(0x64)? as usize;

        let mut string_offsets = Vec::with_capacity(string_ids_size);
        for i in 0..string_ids_size {
            string_offsets.push(r.u32(string_ids_off + 4 * i)?);
        }
        let mut type_desc_idx = Vec::with_capacity(type_ids_size);
        for i in 0..type_ids_size {
            type_desc_idx.push(r.u32(type_ids_off + 4 * i)?);
        }
        let mut protos = Vec::with_capacity(proto_ids_size);
        for i in 0..proto_ids_size {
            let base = proto_ids_off + 12 * i;
            protos.push(ProtoId {
                return_type_idx: r.u32(base + 4)?,
                parameters_off: r.u32(base + 8)?,
            });
        }
        let mut method_ids = Vec::with_capacity(method_ids_size);
        for i in 0..method_ids_size {
            let base = method_ids_off + 8 * i;
            method_ids.push(MethodId {
                class_idx: r.u16(base)?,
                proto_idx: r.u16(base + 2)?,
                name_idx: r.u32(base + 4)?,
            });
        }
        let mut class_defs = Vec::with_capacity(class_defs_size);
        for i in 0..class_defs_size {
            let base = class_defs_off + 32 * i;
            class_defs.push(ClassDef {
                class_idx: r.u32(base)?,
                class_data_off: r.u32(base + 24)?,
            });
        }

        Ok(Dex {
            bytes,
            checksum_ok,
            string_offsets,
            type_desc_idx,
            protos,
            method_ids,
            class_defs,
        })
    }

    fn reader(&self) -> Reader<'a> {
        Reader { bytes: self.bytes }
    }

    fn string(&self, idx: u32) -> Result<String> {
        let off = *self
            .string_offsets
            .get(idx as usize)
            .ok_or_else(|| malformed(0, format!("string index {idx} out of range")))?
            as usize;
        let r = self.reader();
        let (_utf16_len, mut pos) = r.uleb128(off)?;
        // MUTF-8: 1-3 byte groups, each one UTF-16 code unit, NUL-terminated.
        let mut units: Vec<u16> = Vec::new();
        loop {
            let b = r.u8(pos)?;
            pos += 1;
            match b {
                0 => break,
                0x01..=0x7f => units.push(u16::from(b)),
                0xc0..=0xdf => {
                    let b2 = r.u8(pos)?;
                    pos += 1;
                    units.push(((u16::from(b) & 0x1f) << 6) | (u16::from(b2) & 0x3f));
                }
                0xe0..=0xef => {
                    let b2 = r.u8(pos)?;
                    let b3 = r.u8(pos + 1)?;
                    pos += 2;
                    units.push(
                        ((u16::from(b) & 0x0f) << 12)
                            | ((u16::from(b2) & 0x3f) << 6)
                            | (u16::from(b3) & 0x3f),
                    );
                }
                _ => return Err(malformed(pos - 1, "invalid mutf-8 lead byte")),
            }
        }
        Ok(String::from_utf16_lossy(&units))
    }

    fn type_descriptor(&self, idx: u32) -> Result<String> {
        let desc_idx = *self
            .type_desc_idx
            .get(idx as usize)
            .ok_or_else(|| malformed(0, format!("type index {idx} out of range")))?;
        self.string(desc_idx)
    }

    fn method_descriptor(&self, method_idx: u32) -> Result<String> {
        let m = self
            .method_ids
            .get(method_idx as usize)
            .ok_or_else(|| malformed(0, format!("method index {method_idx} out of range")))?;
        let class = self.type_descriptor(u32::from(m.class_idx))?;
        let name = self.string(m.name_idx)?;
        let proto = self
            .protos
            .get(m.proto_idx as usize)
            .ok_or_else(|| malformed(0, format!("proto index {} out of range", m.proto_idx)))?;
        let mut sig = String::from("(");
        if proto.parameters_off != 0 {
            let r = self.reader();
            let off = proto.parameters_off as usize;
            let count = r.u32(off)? as usize;
            for i in 0..count {
                let type_idx = r.u16(off + 4 + 2 * i)?;
                sig.push_str(&self.type_descriptor(u32::from(type_idx))?);
            }
        }
        sig.push(')');
        sig.push_str(&self.type_descriptor(proto.return_type_idx)?);
        Ok(format!("{class}->{name}{sig}"))
    }

    fn class_methods(&self, class_index: usize) -> Result<Vec<MethodRef>> {
        let def = &self.class_defs[class_index];
        if def.class_idx != NO_INDEX {
            // Force descriptor resolution so a bad class_idx surfaces here.
            self.type_descriptor(def.class_idx)?;
        }
        let mut methods = Vec::new();
        if def.class_data_off == 0 {
            return Ok(methods);
        }
        let r = self.reader();
        let mut pos = def.class_data_off as usize;
        let (static_fields, p) = r.uleb128(pos)?;
        pos = p;
        let (instance_fields, p) = r.uleb128(pos)?;
        pos = p;
        let (direct_methods, p) = r.uleb128(pos)?;
        pos = p;
        let (virtual_methods, p) = r.uleb128(pos)?;
        pos = p;

        for _ in 0..(static_fields + instance_fields) {
            let (_idx_diff, p) = r.uleb128(pos)?;
            let (_access, p) = r.uleb128(p)?;
            pos = p;
        }
        for _ in 0..(direct_methods + virtual_methods) {
            // Method indices restart their delta chain between the direct and
            // virtual lists in real files; since only identity matters here,
            // we track a single running index per list below.
            let (idx_diff, p) = r.uleb128(pos)?;
            let (_access, p) = r.uleb128(p)?;
            let (code_off, p) = r.uleb128(p)?;
            pos = p;
            methods.push(MethodRef {
                method_idx: idx_diff,
                code_off: code_off as usize,
            });
        }
        // Convert diffs to absolute indices, resetting at the virtual list.
        let mut acc = 0u32;
        for (i, m) in methods.iter_mut().enumerate() {
            if i == direct_methods as usize {
                acc = 0;
            }
            acc = acc.wrapping_add(m.method_idx);
            m.method_idx = acc;
        }
        Ok(methods)
    }

    /// Walks one method body. `Ok(None)` when there is no code to extract.
    fn method_sequence(&self, m: &MethodRef) -> Result<Option<OpcodeSequence>> {
        if m.code_off == 0 {
            return Ok(None);
        }
        let r = self.reader();
        let insns_size = r.u32(m.code_off + 12)? as usize;
        if insns_size == 0 {
            return Ok(None);
        }
        let insns_off = m.code_off + 16;
        let mut insns = Vec::with_capacity(insns_size);
        for i in 0..insns_size {
            insns.push(r.u16(insns_off + 2 * i)?);
        }
        let opcodes = walk_code_units(&insns)?;
        if opcodes.is_empty() {
            return Ok(None);
        }
        Ok(Some(OpcodeSequence {
            method_id: self.method_descriptor(m.method_idx)?,
            opcodes,
        }))
    }
}

/// Walks an instruction stream, recording the leading opcode byte of each
/// instruction. Payload pseudo-instructions are skipped, not recorded. Never
/// reads past the declared code-unit count.
pub(crate) fn walk_code_units(insns: &[u16]) -> Result<Vec<u8>> {
    let mut opcodes = Vec::new();
    let mut pos = 0usize;
    while pos < insns.len() {
        let unit = insns[pos];
        let op = (unit & 0xff) as u8;
        if op == 0x00 {
            let ident = (unit >> 8) as u8;
            let payload_units = match ident {
                PACKED_SWITCH_PAYLOAD => {
                    let size = *insns.get(pos + 1).ok_or_else(|| {
                        malformed(pos, "truncated packed-switch payload header")
                    })? as usize;
                    4 + size * 2
                }
                SPARSE_SWITCH_PAYLOAD => {
                    let size = *insns.get(pos + 1).ok_or_else(|| {
                        malformed(pos, "truncated sparse-switch payload header")
                    })? as usize;
                    2 + size * 4
                }
                FILL_ARRAY_DATA_PAYLOAD => {
                    if pos + 3 >= insns.len() {
                        return Err(malformed(pos, "truncated fill-array-data payload header"));
                    }
                    let width = insns[pos + 1] as usize;
                    let count =
                        (insns[pos + 2] as usize) | ((insns[pos + 3] as usize) << 16);
                    4 + (count * width + 1) / 2
                }
                _ => {
                    opcodes.push(0x00);
                    pos += 1;
                    continue;
                }
            };
            if pos + payload_units > insns.len() {
                return Err(malformed(pos, "payload overruns the method code"));
            }
            pos += payload_units;
            continue;
        }
        opcodes.push(op);
        match Opcode::decode(op).width_units() {
            Some(w) => {
                if pos + w > insns.len() {
                    return Err(malformed(pos, "instruction overruns the method code"));
                }
                pos += w;
            }
            // Unused opcodes have no defined width; advance one unit so the
            // walk stays bounded. Callers can spot them via is_unused.
            None => pos += 1,
        }
    }
    Ok(opcodes)
}

pub(crate) fn adler32(bytes: &[u8]) -> u32 {
    const MOD: u32 = 65521;
    let mut a: u32 = 1;
    let mut b: u32 = 0;
    for chunk in bytes.chunks(5552) {
        for &byte in chunk {
            a += u32::from(byte);
            b += a;
        }
        a %= MOD;
        b %= MOD;
    }
    (b << 16) | a
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn u8(&self, off: usize) -> Result<u8> {
        self.bytes
            .get(off)
            .copied()
            .ok_or_else(|| malformed(off, "read past end of file"))
    }

    fn u16(&self, off: usize) -> Result<u16> {
        let b = self
            .bytes
            .get(off..off + 2)
            .ok_or_else(|| malformed(off, "read past end of file"))?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&self, off: usize) -> Result<u32> {
        let b = self
            .bytes
            .get(off..off + 4)
            .ok_or_else(|| malformed(off, "read past end of file"))?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    /// Returns `(value, next_offset)`.
    fn uleb128(&self, off: usize) -> Result<(u32, usize)> {
        let mut value: u32 = 0;
        let mut pos = off;
        for shift in (0..35).step_by(7) {
            let byte = self.u8(pos)?;
            pos += 1;
            value |= u32::from(byte & 0x7f) << shift;
            if byte & 0x80 == 0 {
                return Ok((value, pos));
            }
        }
        Err(malformed(off, "uleb128 longer than five bytes"))
    }
}

fn malformed(offset: usize, reason: impl Into<String>) -> Error {
    Error::MalformedDex {
        offset,
        reason: reason.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_truncated_header() {
        let err = extract_from_dex(b"dex\n035\0tooshort", "x").unwrap_err();
        assert!(matches!(err, Error::MalformedDex { .. }));
    }

    #[test]
    fn rejects_bad_magic() {
        let bytes = vec![0u8; 0x70];
        assert!(matches!(
            extract_from_dex(&bytes, "x").unwrap_err(),
            Error::MalformedDex { offset: 0, .. }
        ));
    }

    #[test]
    fn walker_records_leading_bytes_only() {
        // const/16 v0, 42 (2 units) ; return-void (1 unit)
        let insns = [0x0013u16, 42, 0x000e];
        assert_eq!(walk_code_units(&insns).unwrap(), vec![0x13, 0x0e]);
    }

    #[test]
    fn walker_skips_switch_payload() {
        // packed-switch v0, +3 ; then the payload (ident 0x0100, size 1,
        // first_key, one 4-byte target)
        let insns = [0x002bu16, 3, 0, 0x0100, 1, 7, 0, 5, 0];
        assert_eq!(walk_code_units(&insns).unwrap(), vec![0x2b]);
    }

    #[test]
    fn walker_skips_fill_array_payload() {
        // ident 0x0300, width 1, count 3 -> 4 + 2 units
        let insns = [0x0300u16, 1, 3, 0, 0x0201, 0x0003];
        assert_eq!(walk_code_units(&insns).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn walker_flags_overrun() {
        // const-wide needs 5 units but only 1 present
        let insns = [0x0018u16];
        assert!(walk_code_units(&insns).is_err());
    }

    #[test]
    fn walker_steps_over_unused_opcodes() {
        // unused opcode 0x3e then return-void
        let insns = [0x003eu16, 0x000e];
        assert_eq!(walk_code_units(&insns).unwrap(), vec![0x3e, 0x0e]);
    }

    #[test]
    fn adler32_matches_known_vector() {
        assert_eq!(adler32(b"Wikipedia"), 0x11E60398);
    }
}
