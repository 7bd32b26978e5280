//! Street-level panorama appeal analysis.
//!
//! The crate covers the full batch workflow: sampling image locations along a
//! street network, composing directional tiles into panoramas, rating the
//! panoramas through criteria-tiered prompts against a pluggable multimodal
//! backend, ingesting human panel ratings, mean-centering both sides, and
//! comparing them with classical and spatial statistics.

pub mod adjust;
pub mod backend;
pub mod config;
pub mod geo;
pub mod imagery;
pub mod io;
pub mod panel;
pub mod pipeline;
pub mod prompt;
pub mod spatial;
pub mod stats;
