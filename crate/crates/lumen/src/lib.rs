//! File formats and experiment harness for `lumen-core`, plus the pieces
//! the `lumen` binary is built from.

pub mod format;
pub mod harness;
