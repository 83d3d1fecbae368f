//! Corpus hygiene for Android app datasets.
//!
//! Malware corpora accumulate near-identical apps: repackaged variants that
//! share almost all of their code. This crate detects them by fingerprinting
//! each app as the set of its per-method opcode sequences, measuring set
//! similarity with the Ochiai coefficient, and clustering apps that fall
//! within a distance threshold. The surviving cluster representatives form a
//! deduplicated dataset, and the evaluation tools quantify how much the
//! removed duplicates were inflating classifier metrics.
//!
//! The pieces compose as a pipeline:
//!
//! ```text
//! extract -> fingerprint -> cluster -> filter -> features -> evaluate
//! ```
//!
//! Every step is a pure function of its inputs plus explicit seeds, so runs
//! are reproducible byte for byte. See the `examples/` directory for one
//! runnable program per capability, or the `dexdedup` binary for the same
//! operations as subcommands.

pub mod cli;
pub mod cluster;
pub mod dalvik;
pub mod error;
pub mod features;
pub mod fingerprint;
pub mod hash;
pub mod io;
pub mod mleval;
pub mod pipeline;
pub mod synthetic;

pub use error::{Error, Result};
