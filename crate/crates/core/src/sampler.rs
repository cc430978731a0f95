//! Reference-frame sampling outside the training window, and patch dropout on
//! reference frames.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`. Each frame
//! draws from its own stream (`set_stream(frame_index)`), and window planning
//! uses stream [`PLAN_STREAM`]. The output for a given seed is therefore the
//! same on every platform and independent of how frames are scheduled.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constants::{
    BAND_WIDTH, DROPOUT_ALPHA_CUT, DROPOUT_BOUNDARY_MAX, DROPOUT_NONBOUNDARY_MAX, DROPOUT_SIDE_MAX,
    DROPOUT_SIDE_MIN,
};
use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, AlphaMatte, Mask, Rect, RgbFrame, SegMask};
use crate::morphology::boundary_band;

pub const PLAN_STREAM: u64 = u64::MAX;

/// Generator for one stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub sequence_length: usize,
    pub window_indices: Vec<usize>,
    /// Ascending, disjoint from the window.
    pub reference_indices: Vec<usize>,
}

/// Picks a contiguous window uniformly over all offsets, then `n_refs`
/// distinct reference frames uniformly from the frames outside it.
pub fn plan_window(sequence_length: usize, window: usize, n_refs: usize, seed: u64) -> Result<WindowPlan> {
    if window == 0 {
        return Err(Error::invalid("window must contain at least one frame"));
    }
    if sequence_length <= window {
        return Err(Error::SequenceTooShort {
            required: window + 1,
            found: sequence_length,
        });
    }
    let outside = sequence_length - window;
    if n_refs > outside {
        return Err(Error::invalid(format!(
            "{n_refs} reference frames requested but only {outside} lie outside the window"
        )));
    }
    let mut rng = stream_rng(seed, PLAN_STREAM);
    let start = rng.random_range(0..=outside);
    let mut reference_indices: Vec<usize> = index::sample(&mut rng, outside, n_refs)
        .into_iter()
        .map(|k| if k < start { k } else { k + window })
        .collect();
    reference_indices.sort_unstable();
    Ok(WindowPlan {
        sequence_length,
        window_indices: (start..start + window).collect(),
        reference_indices,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropoutSpec {
    /// Boundary patches are drawn uniformly from `0..=boundary_max`.
    pub boundary_max: usize,
    pub nonboundary_max: usize,
    pub side_min: usize,
    pub side_max: usize,
    pub seed: u64,
}

impl DropoutSpec {
    pub fn with_seed(seed: u64) -> Self {
        DropoutSpec {
            boundary_max: DROPOUT_BOUNDARY_MAX,
            nonboundary_max: DROPOUT_NONBOUNDARY_MAX,
            side_min: DROPOUT_SIDE_MIN,
            side_max: DROPOUT_SIDE_MAX,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.side_min == 0 || self.side_min > self.side_max {
            return Err(Error::invalid(format!(
                "patch side range [{}, {}] is empty",
                self.side_min, self.side_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatchKind {
    Boundary,
    NonBoundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedPatch {
    pub kind: PatchKind,
    pub center_row: usize,
    pub center_col: usize,
    pub rect: Rect,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DropoutOutcome {
    pub rgb: RgbFrame,
    pub alpha: AlphaMatte,
    pub patches: Vec<AppliedPatch>,
    pub drawn_boundary: usize,
    pub drawn_nonboundary: usize,
    pub warnings: Vec<String>,
}

/// Boundary region used to centre dropout patches: the band around the
/// alpha binarized at 0.5.
pub fn reference_boundary(alpha: &AlphaMatte) -> Mask {
    let fg = SegMask::from_bools(
        alpha.height(),
        alpha.width(),
        alpha.as_slice().iter().map(|&a| a >= DROPOUT_ALPHA_CUT),
    )
    .expect("shape preserved");
    boundary_band(&fg, BAND_WIDTH).expect("band width is positive")
}

fn patch_rect(center: (usize, usize), side: usize, height: usize, width: usize) -> Rect {
    let ph = side.min(height);
    let pw = side.min(width);
    let top = center.0.saturating_sub(ph / 2).min(height - ph);
    let left = center.1.saturating_sub(pw / 2).min(width - pw);
    Rect {
        top,
        left,
        height: ph,
        width: pw,
    }
}

/// Zeroes random patches in both the frame and its alpha.
pub fn dropout_augment(
    rgb: &RgbFrame,
    alpha: &AlphaMatte,
    boundary: &Mask,
    spec: &DropoutSpec,
    frame_index: u64,
) -> Result<DropoutOutcome> {
    ensure_same_dims(rgb, alpha)?;
    ensure_same_dims(alpha, boundary)?;
    spec.validate()?;
    let (h, w) = (alpha.height(), alpha.width());
    let mut rng = stream_rng(spec.seed, frame_index);
    let drawn_boundary = rng.random_range(0..=spec.boundary_max);
    let drawn_nonboundary = rng.random_range(0..=spec.nonboundary_max);

    let flags = boundary.as_slice();
    let on: Vec<usize> = (0..flags.len()).filter(|&i| flags[i] == 1).collect();
    let off: Vec<usize> = (0..flags.len()).filter(|&i| flags[i] == 0).collect();

    let mut patches = Vec::new();
    let mut warnings = Vec::new();
    let plan = std::iter::repeat_n(PatchKind::Boundary, drawn_boundary)
        .chain(std::iter::repeat_n(PatchKind::NonBoundary, drawn_nonboundary));
    for kind in plan {
        let side = rng.random_range(spec.side_min..=spec.side_max);
        let pool = match kind {
            PatchKind::Boundary => &on,
            PatchKind::NonBoundary => &off,
        };
        if pool.is_empty() {
            warnings.push(format!("frame {frame_index}: no eligible centre for a {kind:?} patch, skipped"));
            continue;
        }
        let idx = pool[rng.random_range(0..pool.len())];
        let center = (idx / w, idx % w);
        patches.push(AppliedPatch {
            kind,
            center_row: center.0,
            center_col: center.1,
            rect: patch_rect(center, side, h, w),
        });
    }

    let (rgb, alpha) = apply_patches(rgb, alpha, &patches)?;
    Ok(DropoutOutcome {
        rgb,
        alpha,
        patches,
        drawn_boundary,
        drawn_nonboundary,
        warnings,
    })
}

/// Replays a recorded patch list.
pub fn apply_patches(rgb: &RgbFrame, alpha: &AlphaMatte, patches: &[AppliedPatch]) -> Result<(RgbFrame, AlphaMatte)> {
    ensure_same_dims(rgb, alpha)?;
    let mut rgb = rgb.clone();
    let mut alpha = alpha.clone();
    for p in patches {
        let r = p.rect;
        if r.top + r.height > alpha.height() || r.left + r.width > alpha.width() {
            return Err(Error::invalid(format!("patch {r:?} exceeds the image")));
        }
        rgb.zero_rect(r);
        alpha.zero_rect(r);
    }
    Ok((rgb, alpha))
}
