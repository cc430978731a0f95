//! Evaluator that reads error probability maps produced elsewhere.
//!
//! Layout under the root directory: `<frame_id>.pfm` for standalone
//! predictions, `v/<frame_id>.pfm` and `i/<frame_id>.pfm` for the two
//! branches of the dual-branch pipeline. A `.png` is used when no `.pfm`
//! exists.

use std::path::{Path, PathBuf};

use super::raster::load_prob;
use crate::error::{Error, Result};
use crate::evalmap::{Branch, Evaluator, EvaluatorInput};
use crate::image::ProbMap;

#[derive(Clone, Debug)]
pub struct PrecomputedEvaluator {
    root: PathBuf,
}

impl PrecomputedEvaluator {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        PrecomputedEvaluator { root: root.into() }
    }

    pub fn path_for(&self, frame_id: &str, branch: Branch) -> Option<PathBuf> {
        let dir = match branch {
            Branch::Single => self.root.clone(),
            other => self.root.join(other.tag()),
        };
        ["pfm", "png"]
            .iter()
            .map(|ext| dir.join(format!("{frame_id}.{ext}")))
            .find(|p| p.is_file())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

impl Evaluator for PrecomputedEvaluator {
    fn name(&self) -> &str {
        "precomputed"
    }

    fn probability_map(&self, input: &EvaluatorInput<'_>) -> Result<ProbMap> {
        let path = self
            .path_for(input.frame_id, input.branch)
            .ok_or_else(|| Error::MissingInput {
                frame: input.frame_id.to_string(),
                what: format!(
                    "no precomputed {} probability map under {}",
                    input.branch.tag(),
                    self.root.display()
                ),
            })?;
        load_prob(&path)
    }
}
