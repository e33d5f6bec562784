//! Multi-object tracking with per-track long-term memory.
//!
//! A transformer-style decoder turns frame tokens into detections and track
//! outputs; a temporal interaction module fuses each output with the track's
//! memory into the next query. The [`metrics`] module scores the results with
//! HOTA, CLEAR-MOT and identity metrics.

pub mod ablation;
pub mod attention;
pub mod decoder;
pub mod error;
pub mod io;
pub mod layout;
pub mod lifecycle;
pub mod linalg;
pub mod memory;
pub mod metrics;
pub mod oracle;
pub mod scenario;
pub mod selftest;
pub mod structured;
pub mod tim;

pub use decoder::{BoundingBox, FrameFeatures};
pub use error::{Error, Result};
pub use io::config::RunConfig;
pub use layout::Layout;
pub use lifecycle::{run_sequence, FrameResult, Model, Tracker, TrackerConfig};
pub use linalg::Tensor2;
pub use memory::MemoryConfig;
pub use metrics::{evaluate, Report, Sequence};
pub use scenario::{generate, Scenario, ScenarioConfig, ScenarioKind};
pub use structured::StructuredConfig;
pub use tim::TimVariant;
