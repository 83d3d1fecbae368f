//! Programmatic assembly of small dex files.
//!
//! Produces structurally valid containers laid out per the published format:
//! sorted string/type/proto/method pools, class data, code items, a map list
//! and a correct adler32 checksum (the SHA-1 signature field is zeroed).
//! Intended for fixtures, examples and synthetic corpora, not for repacking
//! real apps.

use super::dex::adler32;

const NO_INDEX: u32 = 0xffff_ffff;
const OBJECT_DESC: &str = "Ljava/lang/Object;";

#[derive(Debug, Clone)]
struct MethodSpec {
    class_desc: String,
    name: String,
    proto: ProtoKey,
    registers: u16,
    /// `None` for pure references (imported API methods without bodies).
    code_units: Option<Vec<u16>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct ProtoKey {
    return_desc: String,
    param_descs: Vec<String>,
}

impl ProtoKey {
    fn parse(proto: &str) -> ProtoKey {
        let inner_end = proto.find(')').expect("proto must contain ')'");
        assert!(proto.starts_with('('), "proto must start with '('");
        let params = descriptors(&proto[1..inner_end]);
        let return_desc = proto[inner_end + 1..].to_string();
        assert!(!return_desc.is_empty(), "proto must have a return type");
        ProtoKey {
            return_desc,
            param_descs: params,
        }
    }

    fn shorty(&self) -> String {
        let mut s = String::new();
        s.push(shorty_char(&self.return_desc));
        for p in &self.param_descs {
            s.push(shorty_char(p));
        }
        s
    }
}

fn shorty_char(desc: &str) -> char {
    match desc.as_bytes()[0] {
        b'[' | b'L' => 'L',
        c => c as char,
    }
}

/// Splits a concatenated run of type descriptors, e.g. `I[JLfoo;` ->
/// `["I", "[J", "Lfoo;"]`.
fn descriptors(mut s: &str) -> Vec<String> {
    let mut out = Vec::new();
    while !s.is_empty() {
        let mut len = 0;
        while s.as_bytes()[len] == b'[' {
            len += 1;
        }
        len += match s.as_bytes()[len] {
            b'L' => s[len..].find(';').expect("unterminated class descriptor") + 1,
            _ => 1,
        };
        out.push(s[..len].to_string());
        s = &s[len..];
    }
    out
}

/// Builder for a single dex file.
#[derive(Debug, Default)]
pub struct DexBuilder {
    classes: Vec<String>,
    methods: Vec<MethodSpec>,
}

impl DexBuilder {
    pub fn new() -> DexBuilder {
        DexBuilder::default()
    }

    /// Declares a class; methods are attached with [`DexBuilder::method`].
    pub fn class(&mut self, descriptor: &str) -> &mut Self {
        if !self.classes.iter().any(|c| c == descriptor) {
            self.classes.push(descriptor.to_string());
        }
        self
    }

    /// Adds a method with a body to the most convenient owning class.
    ///
    /// `proto` uses descriptor syntax, e.g. `(ILjava/lang/String;)V`.
    /// `code_units` are raw 16-bit instruction units.
    pub fn method(
        &mut self,
        class_desc: &str,
        name: &str,
        proto: &str,
        registers: u16,
        code_units: &[u16],
    ) -> &mut Self {
        self.class(class_desc);
        self.methods.push(MethodSpec {
            class_desc: class_desc.to_string(),
            name: name.to_string(),
            proto: ProtoKey::parse(proto),
            registers,
            code_units: Some(code_units.to_vec()),
        });
        self
    }

    /// Adds a bodyless entry to the method-reference pool, the way invoking
    /// an external API method would.
    pub fn method_ref(&mut self, class_desc: &str, name: &str, proto: &str) -> &mut Self {
        self.methods.push(MethodSpec {
            class_desc: class_desc.to_string(),
            name: name.to_string(),
            proto: ProtoKey::parse(proto),
            registers: 0,
            code_units: None,
        });
        self
    }

    /// Assembles the file.
    pub fn build(&self) -> Vec<u8> {
        // String pool: every descriptor, shorty and name, sorted. Fixture
        // strings are ASCII so byte order equals UTF-16 code point order.
        let mut strings: Vec<String> = Vec::new();
        let add_str = |strings: &mut Vec<String>, s: &str| {
            if !strings.iter().any(|x| x == s) {
                strings.push(s.to_string());
            }
        };
        let mut type_descs: Vec<String> = vec![OBJECT_DESC.to_string()];
        for c in &self.classes {
            if !type_descs.iter().any(|t| t == c) {
                type_descs.push(c.clone());
            }
        }
        let mut protos: Vec<ProtoKey> = Vec::new();
        for m in &self.methods {
            for d in std::iter::once(&m.proto.return_desc).chain(m.proto.param_descs.iter()) {
                if !type_descs.iter().any(|t| t == d) {
                    type_descs.push(d.clone());
                }
            }
            if !type_descs.iter().any(|t| t == &m.class_desc) {
                type_descs.push(m.class_desc.clone());
            }
            if !protos.contains(&m.proto) {
                protos.push(m.proto.clone());
            }
        }
        for t in &type_descs {
            add_str(&mut strings, t);
        }
        for p in &protos {
            add_str(&mut strings, &p.shorty());
        }
        for m in &self.methods {
            add_str(&mut strings, &m.name);
        }
        strings.sort();
        let str_idx =
            |s: &str| -> u32 { strings.iter().position(|x| x == s).unwrap() as u32 };

        type_descs.sort_by_key(|d| str_idx(d));
        let type_idx =
            |d: &str| -> u32 { type_descs.iter().position(|x| x == d).unwrap() as u32 };

        protos.sort_by_key(|p| {
            (
                type_idx(&p.return_desc),
                p.param_descs.iter().map(|d| type_idx(d)).collect::<Vec<_>>(),
            )
        });
        let proto_idx = |p: &ProtoKey| -> u32 { protos.iter().position(|x| x == p).unwrap() as u32 };

        // Method pool sorted by (class, name, proto) as the format requires.
        let mut method_keys: Vec<(u32, u32, u32)> = self
            .methods
            .iter()
            .map(|m| {
                (
                    type_idx(&m.class_desc),
                    str_idx(&m.name),
                    proto_idx(&m.proto),
                )
            })
            .collect();
        method_keys.sort();
        method_keys.dedup();
        let method_idx = |m: &MethodSpec| -> u32 {
            let key = (
                type_idx(&m.class_desc),
                str_idx(&m.name),
                proto_idx(&m.proto),
            );
            method_keys.iter().position(|k| *k == key).unwrap() as u32
        };

        let header_size = 0x70usize;
        let string_ids_off = header_size;
        let type_ids_off = string_ids_off + 4 * strings.len();
        let proto_ids_off = type_ids_off + 4 * type_descs.len();
        let method_ids_off = proto_ids_off + 12 * protos.len();
        let class_defs_off = method_ids_off + 8 * method_keys.len();
        let data_off = class_defs_off + 32 * self.classes.len();

        // Data section, with every offset recorded as it is laid down.
        let mut data: Vec<u8> = Vec::new();
        let align4 = |data: &mut Vec<u8>| {
            while (data.len() + data_off) % 4 != 0 {
                data.push(0);
            }
        };
        let abs = |data: &Vec<u8>| data.len() + data_off;

        // type_lists for protos with parameters
        let mut param_list_offs: Vec<u32> = vec![0; protos.len()];
        for (i, p) in protos.iter().enumerate() {
            if p.param_descs.is_empty() {
                continue;
            }
            align4(&mut data);
            param_list_offs[i] = abs(&data) as u32;
            data.extend_from_slice(&(p.param_descs.len() as u32).to_le_bytes());
            for d in &p.param_descs {
                data.extend_from_slice(&(type_idx(d) as u16).to_le_bytes());
            }
        }
        let type_list_section = param_list_offs.iter().find(|&&o| o != 0).copied();
        let type_lists_emitted = param_list_offs.iter().filter(|&&o| o != 0).count() as u32;

        // code items
        let mut code_offs: Vec<u32> = vec![0; self.methods.len()];
        let mut first_code_off = 0u32;
        for (i, m) in self.methods.iter().enumerate() {
            let Some(units) = &m.code_units else { continue };
            align4(&mut data);
            code_offs[i] = abs(&data) as u32;
            if first_code_off == 0 {
                first_code_off = code_offs[i];
            }
            data.extend_from_slice(&m.registers.to_le_bytes());
            data.extend_from_slice(&0u16.to_le_bytes()); // ins_size
            data.extend_from_slice(&0u16.to_le_bytes()); // outs_size
            data.extend_from_slice(&0u16.to_le_bytes()); // tries_size
            data.extend_from_slice(&0u32.to_le_bytes()); // debug_info_off
            data.extend_from_slice(&(units.len() as u32).to_le_bytes());
            for u in units {
                data.extend_from_slice(&u.to_le_bytes());
            }
        }
        let code_items_emitted = code_offs.iter().filter(|&&o| o != 0).count() as u32;

        // class_data per class (methods with bodies only, all as direct)
        let mut class_data_offs: Vec<u32> = vec![0; self.classes.len()];
        let mut first_class_data_off = 0u32;
        for (ci, class_desc) in self.classes.iter().enumerate() {
            let mut members: Vec<(u32, u32)> = self
                .methods
                .iter()
                .enumerate()
                .filter(|(_, m)| &m.class_desc == class_desc && m.code_units.is_some())
                .map(|(i, m)| (method_idx(m), code_offs[i]))
                .collect();
            if members.is_empty() {
                continue;
            }
            members.sort();
            class_data_offs[ci] = abs(&data) as u32;
            if first_class_data_off == 0 {
                first_class_data_off = class_data_offs[ci];
            }
            push_uleb(&mut data, 0); // static fields
            push_uleb(&mut data, 0); // instance fields
            push_uleb(&mut data, members.len() as u32); // direct methods
            push_uleb(&mut data, 0); // virtual methods
            let mut prev = 0u32;
            for (k, (idx, code_off)) in members.iter().enumerate() {
                let diff = if k == 0 { *idx } else { idx - prev };
                prev = *idx;
                push_uleb(&mut data, diff);
                push_uleb(&mut data, 0x0009); // public static
                push_uleb(&mut data, *code_off);
            }
        }
        let class_data_emitted = class_data_offs.iter().filter(|&&o| o != 0).count() as u32;

        // string_data
        let mut string_data_offs: Vec<u32> = Vec::with_capacity(strings.len());
        let first_string_data_off = abs(&data) as u32;
        for s in &strings {
            string_data_offs.push(abs(&data) as u32);
            push_uleb(&mut data, s.chars().count() as u32);
            data.extend_from_slice(s.as_bytes()); // fixtures are ASCII
            data.push(0);
        }

        // map_list
        align4(&mut data);
        let map_off = abs(&data) as u32;
        let mut map: Vec<(u16, u32, u32)> = vec![
            (0x0000, 1, 0),
            (0x0001, strings.len() as u32, string_ids_off as u32),
            (0x0002, type_descs.len() as u32, type_ids_off as u32),
        ];
        if !protos.is_empty() {
            map.push((0x0003, protos.len() as u32, proto_ids_off as u32));
        }
        if !method_keys.is_empty() {
            map.push((0x0005, method_keys.len() as u32, method_ids_off as u32));
        }
        if !self.classes.is_empty() {
            map.push((0x0006, self.classes.len() as u32, class_defs_off as u32));
        }
        if let Some(off) = type_list_section {
            map.push((0x1001, type_lists_emitted, off));
        }
        if code_items_emitted > 0 {
            map.push((0x2001, code_items_emitted, first_code_off));
        }
        if class_data_emitted > 0 {
            map.push((0x2000, class_data_emitted, first_class_data_off));
        }
        if !strings.is_empty() {
            map.push((0x2002, strings.len() as u32, first_string_data_off));
        }
        map.push((0x1000, 1, map_off));
        data.extend_from_slice(&(map.len() as u32).to_le_bytes());
        for (kind, size, off) in &map {
            data.extend_from_slice(&kind.to_le_bytes());
            data.extend_from_slice(&0u16.to_le_bytes());
            data.extend_from_slice(&size.to_le_bytes());
            data.extend_from_slice(&off.to_le_bytes());
        }

        // Assemble the file.
        let file_size = data_off + data.len();
        let mut out = Vec::with_capacity(file_size);
        out.extend_from_slice(b"dex\n035\0");
        out.extend_from_slice(&[0u8; 4]); // checksum, patched below
        out.extend_from_slice(&[0u8; 20]); // signature left zeroed
        out.extend_from_slice(&(file_size as u32).to_le_bytes());
        out.extend_from_slice(&(header_size as u32).to_le_bytes());
        out.extend_from_slice(&0x1234_5678u32.to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes()); // link_size
        out.extend_from_slice(&0u32.to_le_bytes()); // link_off
        out.extend_from_slice(&map_off.to_le_bytes());
        let section = |out: &mut Vec<u8>, size: usize, off: usize| {
            out.extend_from_slice(&(size as u32).to_le_bytes());
            out.extend_from_slice(&(off as u32).to_le_bytes());
        };
        section(&mut out, strings.len(), string_ids_off);
        section(&mut out, type_descs.len(), type_ids_off);
        section(&mut out, protos.len(), proto_ids_off);
        out.extend_from_slice(&0u32.to_le_bytes()); // field_ids_size
        out.extend_from_slice(&0u32.to_le_bytes()); // field_ids_off
        section(&mut out, method_keys.len(), method_ids_off);
        section(&mut out, self.classes.len(), class_defs_off);
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(&(data_off as u32).to_le_bytes());
        debug_assert_eq!(out.len(), header_size);

        for off in &string_data_offs {
            out.extend_from_slice(&off.to_le_bytes());
        }
        for t in &type_descs {
            out.extend_from_slice(&str_idx(t).to_le_bytes());
        }
        for (i, p) in protos.iter().enumerate() {
            out.extend_from_slice(&str_idx(&p.shorty()).to_le_bytes());
            out.extend_from_slice(&type_idx(&p.return_desc).to_le_bytes());
            out.extend_from_slice(&param_list_offs[i].to_le_bytes());
        }
        for (class, name, proto) in &method_keys {
            out.extend_from_slice(&(*class as u16).to_le_bytes());
            out.extend_from_slice(&(*proto as u16).to_le_bytes());
            out.extend_from_slice(&name.to_le_bytes());
        }
        for (ci, class_desc) in self.classes.iter().enumerate() {
            out.extend_from_slice(&type_idx(class_desc).to_le_bytes());
            out.extend_from_slice(&0x0001u32.to_le_bytes()); // public
            out.extend_from_slice(&type_idx(OBJECT_DESC).to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes()); // interfaces_off
            out.extend_from_slice(&NO_INDEX.to_le_bytes()); // source_file_idx
            out.extend_from_slice(&0u32.to_le_bytes()); // annotations_off
            out.extend_from_slice(&class_data_offs[ci].to_le_bytes());
            out.extend_from_slice(&0u32.to_le_bytes()); // static_values_off
        }
        out.extend_from_slice(&data);
        debug_assert_eq!(out.len(), file_size);

        let checksum = adler32(&out[12..]);
        out[8..12].copy_from_slice(&checksum.to_le_bytes());
        out
    }
}

fn push_uleb(out: &mut Vec<u8>, mut value: u32) {
    loop {
        let byte = (value & 0x7f) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            break;
        }
        out.push(byte | 0x80);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dalvik::{extract_from_dex, referenced_method_names};

    #[test]
    fn minimal_fixture_round_trips() {
        let mut b = DexBuilder::new();
        // const/4 v0, #0 ; return v0
        b.method("Lfix/A;", "go", "()I", 1, &[0x0012, 0x000f]);
        let bytes = b.build();
        let ex = extract_from_dex(&bytes, "fixture").unwrap();
        assert_eq!(ex.sequences.len(), 1);
        assert_eq!(ex.sequences[0].opcodes, vec![0x12, 0x0f]);
        assert_eq!(ex.sequences[0].method_id, "Lfix/A;->go()I");
        assert_eq!(ex.report.method_count, 1);
        assert_eq!(ex.report.skipped_methods, 0);
        assert!(
            ex.report.parse_warnings.is_empty(),
            "unexpected warnings: {:?}",
            ex.report.parse_warnings
        );
    }

    #[test]
    fn empty_class_yields_no_sequences() {
        let mut b = DexBuilder::new();
        b.class("Lfix/Empty;");
        let ex = extract_from_dex(&b.build(), "empty").unwrap();
        assert!(ex.sequences.is_empty());
        assert_eq!(ex.report.method_count, 0);
    }

    #[test]
    fn method_refs_land_in_the_pool() {
        let mut b = DexBuilder::new();
        b.method("Lfix/A;", "go", "()V", 1, &[0x000e]);
        b.method_ref("Landroid/telephony/SmsManager;", "sendTextMessage", "()V");
        let names = referenced_method_names(&b.build()).unwrap();
        assert!(names.contains(&"go".to_string()));
        assert!(names.contains(&"sendTextMessage".to_string()));
    }

    #[test]
    fn parameters_appear_in_method_ids() {
        let mut b = DexBuilder::new();
        b.method("Lfix/A;", "f", "(I[JLjava/lang/Object;)V", 4, &[0x000e]);
        let ex = extract_from_dex(&b.build(), "params").unwrap();
        assert_eq!(ex.sequences[0].method_id, "Lfix/A;->f(I[JLjava/lang/Object;)V");
    }
}
