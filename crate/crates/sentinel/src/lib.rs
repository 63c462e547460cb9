//! Host-side companion to [`sentinel_core`]: file formats, stream IO, the
//! engine driver loop and the `sentinel` command-line interface.
//!
//! The core crate is deliberately free of clocks, files and threads; this
//! crate supplies all three. [`model_file`] defines the on-disk model
//! format, [`stream`] the CSV and binary sample-stream formats, [`host`]
//! the driver that feeds streams into an [`sentinel_core::runtime::Engine`]
//! with wall-clock timestamps and optional thread-parallel inference, and
//! [`reports`] the CSV/text report emitters. [`cli`] ties it together.

pub mod cli;
pub mod host;
pub mod model_file;
pub mod reports;
pub mod stream;
