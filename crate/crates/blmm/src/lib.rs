//! Input, reports and the command line for `blmm-core`.

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod io;
pub mod report;
pub mod synth;
