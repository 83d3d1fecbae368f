//! Extraction of per-method opcode sequences from Android app binaries.
//!
//! Three input forms are supported: raw `.dex` files, `.apk`/`.zip`
//! containers holding `classes*.dex` entries, and smali text dumps. All three
//! produce the same shape of output: one [`OpcodeSequence`] per non-empty
//! method body, holding only the leading opcode byte of each instruction in
//! stream order. Operand bytes are skipped using the per-format instruction
//! widths, and the switch/array payload pseudo-instructions are stepped over
//! without being recorded.
//!
//! Extraction is pure: identical input bytes always yield identical output.
//! A malformed method is skipped and noted in the report rather than
//! discarding the whole app; aged corpora are full of dirty files.

pub mod apk;
pub mod builder;
pub mod dex;
pub mod opcode;
pub mod smali;

pub use apk::extract_from_apk;
pub use dex::{extract_from_dex, referenced_method_names};
pub use opcode::{canonicalize, Opcode};
pub use smali::extract_from_smali;

/// Ordered opcode values of one method body. Never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpcodeSequence {
    /// Class descriptor plus method name and signature, or the smali source
    /// position for text inputs.
    pub method_id: String,
    pub opcodes: Vec<u8>,
}

/// Per-app accounting for one extraction run.
#[derive(Debug, Clone, Default)]
pub struct ExtractionReport {
    pub app_id: String,
    /// Equals the number of emitted sequences.
    pub method_count: usize,
    pub skipped_methods: usize,
    pub parse_warnings: Vec<String>,
}

/// Sequences plus their report.
#[derive(Debug, Clone)]
pub struct Extraction {
    pub sequences: Vec<OpcodeSequence>,
    pub report: ExtractionReport,
}
