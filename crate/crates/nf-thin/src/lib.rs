#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
//! Experiment harness, file formats, plots and CLI support for the
//! `nf-thin-core` engine.

pub mod config;
pub mod harness;
pub mod io;
pub mod oracle;
pub mod svg;
