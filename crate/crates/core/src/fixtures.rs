//! Victim firmware shipped in-repo, assembled on demand. No external
//! toolchain is involved; the sources double as assembler test input.

use crate::asm::{assemble, Assembled};

pub const LOOP_COUNTER: &str = include_str!("../fixtures/loop_counter.s");
pub const MODE_MATRIX: &str = include_str!("../fixtures/mode_matrix.s");
pub const STACK_OPS: &str = include_str!("../fixtures/stack_ops.s");
pub const AES_KEYEXPAND: &str = include_str!("../fixtures/aes_keyexpand.s");
pub const DINT_ENTRY: &str = include_str!("../fixtures/dint_entry.s");

/// (name, source) for every shipped fixture.
pub fn all() -> Vec<(&'static str, &'static str)> {
    vec![
        ("loop_counter", LOOP_COUNTER),
        ("mode_matrix", MODE_MATRIX),
        ("stack_ops", STACK_OPS),
        ("aes_keyexpand", AES_KEYEXPAND),
        ("dint_entry", DINT_ENTRY),
    ]
}

pub fn source(name: &str) -> Option<&'static str> {
    all().into_iter().find(|(n, _)| *n == name).map(|(_, s)| s)
}

/// Assemble a shipped fixture. Panics on an unknown name; shipped sources
/// are expected to assemble.
pub fn build(name: &str) -> Assembled {
    let src = source(name).unwrap_or_else(|| panic!("no fixture `{}`", name));
    assemble(src).unwrap_or_else(|e| panic!("fixture `{}`: {}", name, e))
}
