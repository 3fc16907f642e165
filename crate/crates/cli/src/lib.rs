//! Batch front end for `nls-core`: TOML run configs, command dispatch, and a
//! deterministic output layout with a run manifest.

// Negated float comparisons are deliberate: they reject NaN along with the out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use run::{run, Failure, RunOptions, RunReport, MANIFEST};
