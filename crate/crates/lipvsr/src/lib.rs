//! File formats, synthetic corpus generation, configuration, and the
//! staged recognition pipeline built on `lipvsr-core`.

pub mod artifacts;
pub mod config;
pub mod dataio;
pub mod pipeline;
pub mod synth;
