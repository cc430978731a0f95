//! File formats and run artifacts.

pub mod boxes;
pub mod manifest;
pub mod pfm;
mod precomputed;
pub mod raster;
pub mod report;

pub use manifest::{load_manifest, parse_manifest, FrameRecord, GridSpec, LoadedManifest, SequenceManifest};
pub use precomputed::PrecomputedEvaluator;
pub use report::{FrameEntry, RunReport, SkippedFrame};
