//! Detection, classification and sizing of grapevine berries in field
//! images.
//!
//! The chain runs in five steps: colour enhancement ([`imaging`]), circle
//! detection ([`detect`]), per-candidate descriptors ([`features`]), a
//! conditional random field that separates berries from other circular
//! structures ([`crf`]), and conversion of radii to millimetres
//! ([`sizing`]). [`pipeline`] strings them together and writes reports;
//! [`synth`] renders scenes with known ground truth for evaluation.

pub mod config;
pub mod crf;
pub mod detect;
pub mod error;
pub mod features;
pub mod imaging;
pub mod pipeline;
pub mod sizing;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{Error, Result};
