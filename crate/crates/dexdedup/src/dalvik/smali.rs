//! Extraction from smali text, the disassembly format decompilers emit.
//!
//! Only the instruction mnemonics matter here. Directives (`.locals`,
//! `.line`, `.catch`, ...), labels, comments and the data blocks
//! (`.packed-switch`, `.sparse-switch`, `.array-data`, `.annotation`) are
//! skipped; every remaining line inside a method body must start with a
//! mnemonic from the opcode table, variant spellings included.

use super::opcode::{canonicalize, Opcode};
use super::OpcodeSequence;
use crate::error::{Error, Result};

/// Block directives whose contents are data, not instructions.
const SKIP_BLOCKS: &[&str] = &[
    ".annotation",
    ".packed-switch",
    ".sparse-switch",
    ".array-data",
    ".subannotation",
];

/// Parses one smali class and returns a sequence per non-empty method body.
pub fn extract_from_smali(text: &str) -> Result<Vec<OpcodeSequence>> {
    let mut class_desc: Option<String> = None;
    let mut sequences = Vec::new();

    let mut method: Option<(String, Vec<u8>, usize)> = None; // (header, opcodes, line)
    let mut skip_until: Option<String> = None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw_line).trim();
        if line.is_empty() {
            continue;
        }

        if let Some(end) = &skip_until {
            if line == end {
                skip_until = None;
            }
            continue;
        }

        if let Some(rest) = line.strip_prefix(".class") {
            if class_desc.is_some() {
                return Err(Error::MalformedSmali {
                    line: line_no,
                    reason: "more than one .class directive".to_string(),
                });
            }
            let desc = rest.split_whitespace().last().ok_or(Error::MalformedSmali {
                line: line_no,
                reason: ".class directive without a descriptor".to_string(),
            })?;
            class_desc = Some(desc.to_string());
            continue;
        }

        if let Some(rest) = line.strip_prefix(".method") {
            if method.is_some() {
                return Err(Error::MalformedSmali {
                    line: line_no,
                    reason: ".method inside an open method block".to_string(),
                });
            }
            let header = rest.split_whitespace().last().unwrap_or("").to_string();
            method = Some((header, Vec::new(), line_no));
            continue;
        }

        if line == ".end method" {
            let Some((header, opcodes, _)) = method.take() else {
                return Err(Error::MalformedSmali {
                    line: line_no,
                    reason: ".end method without an open method".to_string(),
                });
            };
            if !opcodes.is_empty() {
                let class = class_desc.as_deref().unwrap_or("");
                sequences.push(OpcodeSequence {
                    method_id: format!("{class}->{header}"),
                    opcodes,
                });
            }
            continue;
        }

        let Some((_, opcodes, _)) = method.as_mut() else {
            continue; // class-level directives and fields
        };

        if line.starts_with(':') {
            continue; // label
        }
        if line.starts_with('.') {
            let directive = line.split_whitespace().next().unwrap_or(line);
            if SKIP_BLOCKS.contains(&directive) && !line.contains(".end") {
                skip_until = Some(format!(".end {}", &directive[1..]));
            }
            continue;
        }

        let canonical = resolve_mnemonic(line).ok_or_else(|| Error::UnknownMnemonic {
            mnemonic: line.split_whitespace().next().unwrap_or(line).to_string(),
            line: line_no,
        })?;
        let op = Opcode::from_mnemonic(canonical).expect("canonical mnemonics are in the table");
        opcodes.push(op.value());
    }

    if let Some((_, _, line)) = method {
        return Err(Error::MalformedSmali {
            line,
            reason: ".method block never closed".to_string(),
        });
    }
    if class_desc.is_none() {
        return Err(Error::MalformedSmali {
            line: 1,
            reason: "no .class directive".to_string(),
        });
    }
    Ok(sequences)
}

/// Resolves the mnemonic of an instruction line, tolerating the two-token
/// alias spellings (`move/from 16`, `83 int-to-double`).
fn resolve_mnemonic(line: &str) -> Option<&'static str> {
    let mut tokens = line.split_whitespace();
    let first = tokens.next()?;
    if let Some(c) = canonicalize(first) {
        return Some(c);
    }
    match tokens.next() {
        // Register/literal operands always carry a comma when more follow;
        // a bare second token can still be part of the mnemonic.
        Some(second) if !second.contains(',') => canonicalize(&format!("{first} {second}")),
        _ => None,
    }
}

fn strip_comment(line: &str) -> &str {
    // '#' only starts a comment outside string literals.
    let mut in_str = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLASS: &str = r#"
.class public Lcom/example/A;
.super Ljava/lang/Object;

# a direct method
.method public static go()V
    .locals 1
    .line 10
    const/4 v0, 0x0
    return-void
.end method
"#;

    #[test]
    fn extracts_mnemonics_per_method() {
        let seqs = extract_from_smali(CLASS).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].opcodes, vec![0x12, 0x0e]);
        assert_eq!(seqs[0].method_id, "Lcom/example/A;->go()V");
    }

    #[test]
    fn class_without_methods_is_empty() {
        let seqs = extract_from_smali(".class Lx/Y;\n.super Ljava/lang/Object;\n").unwrap();
        assert!(seqs.is_empty());
    }

    #[test]
    fn unknown_mnemonic_is_an_error() {
        let text = ".class Lx/Y;\n.method a()V\n    frob-widget v0\n.end method\n";
        match extract_from_smali(text).unwrap_err() {
            Error::UnknownMnemonic { mnemonic, line } => {
                assert_eq!(mnemonic, "frob-widget");
                assert_eq!(line, 3);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unbalanced_method_is_an_error() {
        let text = ".class Lx/Y;\n.method a()V\n    return-void\n";
        assert!(matches!(
            extract_from_smali(text).unwrap_err(),
            Error::MalformedSmali { .. }
        ));
    }

    #[test]
    fn payload_blocks_are_skipped() {
        let text = r#"
.class Lx/Y;
.method a(I)V
    .locals 1
    packed-switch p0, :sw
    return-void
    :sw
    .packed-switch 0x0
        :case0
    .end packed-switch
.end method
"#;
        let seqs = extract_from_smali(text).unwrap();
        assert_eq!(seqs[0].opcodes, vec![0x2b, 0x0e]);
    }

    #[test]
    fn alias_spellings_parse() {
        let text = ".class Lx/Y;\n.method a()V\n    const-string-jumbo v0, \"s\"\n    mul-int/2addr e v0, v1\n.end method\n";
        let seqs = extract_from_smali(text).unwrap();
        assert_eq!(seqs[0].opcodes, vec![0x1b, 0xb2]);
    }

    #[test]
    fn labels_and_catches_are_ignored() {
        let text = r#"
.class Lx/Y;
.method a()V
    :start
    nop
    .catch Ljava/lang/Exception; {:start .. :end} :handler
    :end
    :handler
    return-void
.end method
"#;
        let seqs = extract_from_smali(text).unwrap();
        assert_eq!(seqs[0].opcodes, vec![0x00, 0x0e]);
    }
}
