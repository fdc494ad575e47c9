//! Std side of mipilot: file formats, the threaded streaming runtime,
//! throughput benchmarking and the command link transports.

pub mod bench;
pub mod format;
pub mod link;
pub mod runtime;
pub mod train;

pub use mipilot_core as core;
