//! Matting quality evaluation, evaluation-guided fusion and training-data
//! curation.

pub mod analysis;
pub mod constants;
pub mod curation;
pub mod error;
pub mod evalmap;
pub mod filter;
pub mod fusion;
pub mod image;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod morphology;
pub mod pipeline;
pub mod sampler;

pub use error::{Error, Result};
