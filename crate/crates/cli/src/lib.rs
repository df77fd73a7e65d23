//! Library side of the `fdi` command-line tool: configuration, CSV output,
//! run manifests and the subcommands.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod csv;
pub mod manifest;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const NOT_ISOLABLE: u8 = 1;
    pub const CONFIG: u8 = 2;
    /// I/O failure, simulation divergence or a violated timing bound.
    pub const RUNTIME: u8 = 3;
}
