//! The Dalvik opcode map: one mnemonic per byte value, total over `0x00..=0xFF`.
//!
//! The map is bijective: every byte decodes to exactly one mnemonic and every
//! mnemonic encodes back to its byte. Gaps in the instruction set are filled
//! with `unused_XX` placeholder mnemonics so the map stays total. The odex-era
//! optimizer opcodes (`execute-inline`, the `*-quick` family) are included
//! because aged corpora still contain them.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

/// One Dalvik operation code.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Opcode(u8);

impl Opcode {
    /// Decodes a byte value. Total: every byte maps to a mnemonic,
    /// `unused_XX` slots included.
    pub fn decode(value: u8) -> Opcode {
        Opcode(value)
    }

    /// Looks up a canonical mnemonic. Returns `None` for spellings that are
    /// not in the table; see [`canonicalize`] for alias handling.
    pub fn from_mnemonic(mnemonic: &str) -> Option<Opcode> {
        mnemonic_index().get(mnemonic).copied().map(Opcode)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn mnemonic(self) -> &'static str {
        TABLE[self.0 as usize].0
    }

    /// True for gap slots that never carried an instruction.
    pub fn is_unused(self) -> bool {
        TABLE[self.0 as usize].1 == 0
    }

    /// Instruction width in 16-bit code units, `None` for unused slots
    /// (their width is undefined; the stream walker advances one unit).
    pub fn width_units(self) -> Option<usize> {
        match TABLE[self.0 as usize].1 {
            0 => None,
            w => Some(w as usize),
        }
    }
}

impl fmt::Debug for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Opcode(0x{:02X} {})", self.0, self.mnemonic())
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

/// Maps a raw mnemonic spelling to its canonical form.
///
/// Disassembler dumps and transcribed opcode lists drift in small ways
/// (stray spaces, `-jumbo` for `/jumbo`, truncated suffixes). The alias table
/// reconciles every known variant; unknown spellings return `None`.
pub fn canonicalize(raw: &str) -> Option<&'static str> {
    let trimmed = raw.trim();
    if let Some(&value) = mnemonic_index().get(trimmed) {
        return Some(TABLE[value as usize].0);
    }
    ALIASES
        .iter()
        .find(|(variant, _)| *variant == trimmed)
        .map(|&(_, canonical)| canonical)
}

fn mnemonic_index() -> &'static HashMap<&'static str, u8> {
    static INDEX: OnceLock<HashMap<&'static str, u8>> = OnceLock::new();
    INDEX.get_or_init(|| {
        TABLE
            .iter()
            .enumerate()
            .map(|(value, &(name, _))| (name, value as u8))
            .collect()
    })
}

/// Variant spellings observed in the wild, mapped to canonical mnemonics.
pub const ALIASES: &[(&str, &str)] = &[
    ("move/from 16", "move/from16"),
    ("move-wide/from", "move-wide/from16"),
    ("const-wide/high 16", "const-wide/high16"),
    ("const-string-jumbo", "const-string/jumbo"),
    ("filled-new-array-range", "filled-new-array/range"),
    ("invoke-interface-range", "invoke-interface/range"),
    ("83 int-to-double", "int-to-double"),
    ("mul-int/2addr e", "mul-int/2addr"),
    // "reverse subtract" is the official name for the literal forms.
    ("sub-int/lit16", "rsub-int"),
    ("rsub-int/lit16", "rsub-int"),
    ("sub-int/lit8", "rsub-int/lit8"),
];

/// `(mnemonic, width in code units)` per byte value; width 0 marks unused slots.
const TABLE: [(&str, u8); 256] = [
    ("nop", 1),                         // 0x00
    ("move", 1),                        // 0x01
    ("move/from16", 2),                 // 0x02
    ("move/16", 3),                     // 0x03
    ("move-wide", 1),                   // 0x04
    ("move-wide/from16", 2),            // 0x05
    ("move-wide/16", 3),                // 0x06
    ("move-object", 1),                 // 0x07
    ("move-object/from16", 2),          // 0x08
    ("move-object/16", 3),              // 0x09
    ("move-result", 1),                 // 0x0A
    ("move-result-wide", 1),            // 0x0B
    ("move-result-object", 1),          // 0x0C
    ("move-exception", 1),              // 0x0D
    ("return-void", 1),                 // 0x0E
    ("return", 1),                      // 0x0F
    ("return-wide", 1),                 // 0x10
    ("return-object", 1),               // 0x11
    ("const/4", 1),                     // 0x12
    ("const/16", 2),                    // 0x13
    ("const", 3),                       // 0x14
    ("const/high16", 2),                // 0x15
    ("const-wide/16", 2),               // 0x16
    ("const-wide/32", 3),               // 0x17
    ("const-wide", 5),                  // 0x18
    ("const-wide/high16", 2),           // 0x19
    ("const-string", 2),                // 0x1A
    ("const-string/jumbo", 3),          // 0x1B
    ("const-class", 2),                 // 0x1C
    ("monitor-enter", 1),               // 0x1D
    ("monitor-exit", 1),                // 0x1E
    ("check-cast", 2),                  // 0x1F
    ("instance-of", 2),                 // 0x20
    ("array-length", 1),                // 0x21
    ("new-instance", 2),                // 0x22
    ("new-array", 2),                   // 0x23
    ("filled-new-array", 3),            // 0x24
    ("filled-new-array/range", 3),      // 0x25
    ("fill-array-data", 3),             // 0x26
    ("throw", 1),                       // 0x27
    ("goto", 1),                        // 0x28
    ("goto/16", 2),                     // 0x29
    ("goto/32", 3),                     // 0x2A
    ("packed-switch", 3),               // 0x2B
    ("sparse-switch", 3),               // 0x2C
    ("cmpl-float", 2),                  // 0x2D
    ("cmpg-float", 2),                  // 0x2E
    ("cmpl-double", 2),                 // 0x2F
    ("cmpg-double", 2),                 // 0x30
    ("cmp-long", 2),                    // 0x31
    ("if-eq", 2),                       // 0x32
    ("if-ne", 2),                       // 0x33
    ("if-lt", 2),                       // 0x34
    ("if-ge", 2),                       // 0x35
    ("if-gt", 2),                       // 0x36
    ("if-le", 2),                       // 0x37
    ("if-eqz", 2),                      // 0x38
    ("if-nez", 2),                      // 0x39
    ("if-ltz", 2),                      // 0x3A
    ("if-gez", 2),                      // 0x3B
    ("if-gtz", 2),                      // 0x3C
    ("if-lez", 2),                      // 0x3D
    ("unused_3E", 0),                   // 0x3E
    ("unused_3F", 0),                   // 0x3F
    ("unused_40", 0),                   // 0x40
    ("unused_41", 0),                   // 0x41
    ("unused_42", 0),                   // 0x42
    ("unused_43", 0),                   // 0x43
    ("aget", 2),                        // 0x44
    ("aget-wide", 2),                   // 0x45
    ("aget-object", 2),                 // 0x46
    ("aget-boolean", 2),                // 0x47
    ("aget-byte", 2),                   // 0x48
    ("aget-char", 2),                   // 0x49
    ("aget-short", 2),                  // 0x4A
    ("aput", 2),                        // 0x4B
    ("aput-wide", 2),                   // 0x4C
    ("aput-object", 2),                 // 0x4D
    ("aput-boolean", 2),                // 0x4E
    ("aput-byte", 2),                   // 0x4F
    ("aput-char", 2),                   // 0x50
    ("aput-short", 2),                  // 0x51
    ("iget", 2),                        // 0x52
    ("iget-wide", 2),                   // 0x53
    ("iget-object", 2),                 // 0x54
    ("iget-boolean", 2),                // 0x55
    ("iget-byte", 2),                   // 0x56
    ("iget-char", 2),                   // 0x57
    ("iget-short", 2),                  // 0x58
    ("iput", 2),                        // 0x59
    ("iput-wide", 2),                   // 0x5A
    ("iput-object", 2),                 // 0x5B
    ("iput-boolean", 2),                // 0x5C
    ("iput-byte", 2),                   // 0x5D
    ("iput-char", 2),                   // 0x5E
    ("iput-short", 2),                  // 0x5F
    ("sget", 2),                        // 0x60
    ("sget-wide", 2),                   // 0x61
    ("sget-object", 2),                 // 0x62
    ("sget-boolean", 2),                // 0x63
    ("sget-byte", 2),                   // 0x64
    ("sget-char", 2),                   // 0x65
    ("sget-short", 2),                  // 0x66
    ("sput", 2),                        // 0x67
    ("sput-wide", 2),                   // 0x68
    ("sput-object", 2),                 // 0x69
    ("sput-boolean", 2),                // 0x6A
    ("sput-byte", 2),                   // 0x6B
    ("sput-char", 2),                   // 0x6C
    ("sput-short", 2),                  // 0x6D
    ("invoke-virtual", 3),              // 0x6E
    ("invoke-super", 3),                // 0x6F
    ("invoke-direct", 3),               // 0x70
    ("invoke-static", 3),               // 0x71
    ("invoke-interface", 3),            // 0x72
    ("unused_73", 0),                   // 0x73
    ("invoke-virtual/range", 3),        // 0x74
    ("invoke-super/range", 3),          // 0x75
    ("invoke-direct/range", 3),         // 0x76
    ("invoke-static/range", 3),         // 0x77
    ("invoke-interface/range", 3),      // 0x78
    ("unused_79", 0),                   // 0x79
    ("unused_7A", 0),                   // 0x7A
    ("neg-int", 1),                     // 0x7B
    ("not-int", 1),                     // 0x7C
    ("neg-long", 1),                    // 0x7D
    ("not-long", 1),                    // 0x7E
    ("neg-float", 1),                   // 0x7F
    ("neg-double", 1),                  // 0x80
    ("int-to-long", 1),                 // 0x81
    ("int-to-float", 1),                // 0x82
    ("int-to-double", 1),               // 0x83
    ("long-to-int", 1),                 // 0x84
    ("long-to-float", 1),               // 0x85
    ("long-to-double", 1),              // 0x86
    ("float-to-int", 1),                // 0x87
    ("float-to-long", 1),               // 0x88
    ("float-to-double", 1),             // 0x89
    ("double-to-int", 1),               // 0x8A
    ("double-to-long", 1),              // 0x8B
    ("double-to-float", 1),             // 0x8C
    ("int-to-byte", 1),                 // 0x8D
    ("int-to-char", 1),                 // 0x8E
    ("int-to-short", 1),                // 0x8F
    ("add-int", 2),                     // 0x90
    ("sub-int", 2),                     // 0x91
    ("mul-int", 2),                     // 0x92
    ("div-int", 2),                     // 0x93
    ("rem-int", 2),                     // 0x94
    ("and-int", 2),                     // 0x95
    ("or-int", 2),                      // 0x96
    ("xor-int", 2),                     // 0x97
    ("shl-int", 2),                     // 0x98
    ("shr-int", 2),                     // 0x99
    ("ushr-int", 2),                    // 0x9A
    ("add-long", 2),                    // 0x9B
    ("sub-long", 2),                    // 0x9C
    ("mul-long", 2),                    // 0x9D
    ("div-long", 2),                    // 0x9E
    ("rem-long", 2),                    // 0x9F
    ("and-long", 2),                    // 0xA0
    ("or-long", 2),                     // 0xA1
    ("xor-long", 2),                    // 0xA2
    ("shl-long", 2),                    // 0xA3
    ("shr-long", 2),                    // 0xA4
    ("ushr-long", 2),                   // 0xA5
    ("add-float", 2),                   // 0xA6
    ("sub-float", 2),                   // 0xA7
    ("mul-float", 2),                   // 0xA8
    ("div-float", 2),                   // 0xA9
    ("rem-float", 2),                   // 0xAA
    ("add-double", 2),                  // 0xAB
    ("sub-double", 2),                  // 0xAC
    ("mul-double", 2),                  // 0xAD
    ("div-double", 2),                  // 0xAE
    ("rem-double", 2),                  // 0xAF
    ("add-int/2addr", 1),               // 0xB0
    ("sub-int/2addr", 1),               // 0xB1
    ("mul-int/2addr", 1),               // 0xB2
    ("div-int/2addr", 1),               // 0xB3
    ("rem-int/2addr", 1),               // 0xB4
    ("and-int/2addr", 1),               // 0xB5
    ("or-int/2addr", 1),                // 0xB6
    ("xor-int/2addr", 1),               // 0xB7
    ("shl-int/2addr", 1),               // 0xB8
    ("shr-int/2addr", 1),               // 0xB9
    ("ushr-int/2addr", 1),              // 0xBA
    ("add-long/2addr", 1),              // 0xBB
    ("sub-long/2addr", 1),              // 0xBC
    ("mul-long/2addr", 1),              // 0xBD
    ("div-long/2addr", 1),              // 0xBE
    ("rem-long/2addr", 1),              // 0xBF
    ("and-long/2addr", 1),              // 0xC0
    ("or-long/2addr", 1),               // 0xC1
    ("xor-long/2addr", 1),              // 0xC2
    ("shl-long/2addr", 1),              // 0xC3
    ("shr-long/2addr", 1),              // 0xC4
    ("ushr-long/2addr", 1),             // 0xC5
    ("add-float/2addr", 1),             // 0xC6
    ("sub-float/2addr", 1),             // 0xC7
    ("mul-float/2addr", 1),             // 0xC8
    ("div-float/2addr", 1),             // 0xC9
    ("rem-float/2addr", 1),             // 0xCA
    ("add-double/2addr", 1),            // 0xCB
    ("sub-double/2addr", 1),            // 0xCC
    ("mul-double/2addr", 1),            // 0xCD
    ("div-double/2addr", 1),            // 0xCE
    ("rem-double/2addr", 1),            // 0xCF
    ("add-int/lit16", 2),               // 0xD0
    ("rsub-int", 2),                    // 0xD1
    ("mul-int/lit16", 2),               // 0xD2
    ("div-int/lit16", 2),               // 0xD3
    ("rem-int/lit16", 2),               // 0xD4
    ("and-int/lit16", 2),               // 0xD5
    ("or-int/lit16", 2),                // 0xD6
    ("xor-int/lit16", 2),               // 0xD7
    ("add-int/lit8", 2),                // 0xD8
    ("rsub-int/lit8", 2),               // 0xD9
    ("mul-int/lit8", 2),                // 0xDA
    ("div-int/lit8", 2),                // 0xDB
    ("rem-int/lit8", 2),                // 0xDC
    ("and-int/lit8", 2),                // 0xDD
    ("or-int/lit8", 2),                 // 0xDE
    ("xor-int/lit8", 2),                // 0xDF
    ("shl-int/lit8", 2),                // 0xE0
    ("shr-int/lit8", 2),                // 0xE1
    ("ushr-int/lit8", 2),               // 0xE2
    ("unused_E3", 0),                   // 0xE3
    ("unused_E4", 0),                   // 0xE4
    ("unused_E5", 0),                   // 0xE5
    ("unused_E6", 0),                   // 0xE6
    ("unused_E7", 0),                   // 0xE7
    ("unused_E8", 0),                   // 0xE8
    ("unused_E9", 0),                   // 0xE9
    ("unused_EA", 0),                   // 0xEA
    ("unused_EB", 0),                   // 0xEB
    ("unused_EC", 0),                   // 0xEC
    ("unused_ED", 0),                   // 0xED
    ("execute-inline", 3),              // 0xEE
    ("unused_EF", 0),                   // 0xEF
    ("invoke-direct-empty", 3),         // 0xF0
    ("unused_F1", 0),                   // 0xF1
    ("iget-quick", 2),                  // 0xF2
    ("iget-wide-quick", 2),             // 0xF3
    ("iget-object-quick", 2),           // 0xF4
    ("iput-quick", 2),                  // 0xF5
    ("iput-wide-quick", 2),             // 0xF6
    ("iput-object-quick", 2),           // 0xF7
    ("invoke-virtual-quick", 3),        // 0xF8
    ("invoke-virtual-quick/range", 3),  // 0xF9
    ("invoke-super-quick", 3),          // 0xFA
    ("invoke-super-quick/range", 3),    // 0xFB
    ("unused_FC", 0),                   // 0xFC
    ("unused_FD", 0),                   // 0xFD
    ("unused_FE", 0),                   // 0xFE
    ("unused_FF", 0),                   // 0xFF
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn map_is_total_and_bijective() {
        let mut seen = HashSet::new();
        for value in 0..=255u8 {
            let op = Opcode::decode(value);
            let name = op.mnemonic();
            assert!(!name.is_empty());
            assert!(seen.insert(name), "duplicate mnemonic {name}");
            assert_eq!(Opcode::from_mnemonic(name), Some(op));
        }
        assert_eq!(seen.len(), 256);
    }

    #[test]
    fn decode_examples() {
        assert_eq!(Opcode::decode(0x6E).mnemonic(), "invoke-virtual");
        assert_eq!(Opcode::decode(0x00).mnemonic(), "nop");
        assert_eq!(Opcode::decode(0x3E).mnemonic(), "unused_3E");
        assert!(Opcode::decode(0x3E).is_unused());
        assert!(!Opcode::decode(0x6E).is_unused());
    }

    #[test]
    fn unused_slots_have_no_width() {
        let unused: Vec<u8> = (0..=255u8)
            .filter(|&v| Opcode::decode(v).is_unused())
            .collect();
        assert_eq!(unused.len(), 26);
        for v in unused {
            assert_eq!(Opcode::decode(v).width_units(), None);
        }
        assert_eq!(Opcode::decode(0x18).width_units(), Some(5));
        assert_eq!(Opcode::decode(0x6E).width_units(), Some(3));
        assert_eq!(Opcode::decode(0x12).width_units(), Some(1));
    }

    #[test]
    fn aliases_resolve_to_table_entries() {
        for &(variant, canonical) in ALIASES {
            assert_eq!(canonicalize(variant), Some(canonical), "alias {variant}");
            assert!(
                Opcode::from_mnemonic(canonical).is_some(),
                "alias target {canonical} missing from table"
            );
        }
        assert_eq!(canonicalize("const/4"), Some("const/4"));
        assert_eq!(canonicalize("frob-widget"), None);
    }
}
