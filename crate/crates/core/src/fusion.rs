//! Dual-branch alpha fusion.
//!
//! Pixels where the video branch is unreliable but the image branch is
//! reliable form the fusion mask. The mask is softened with a Gaussian blur
//! and used as a per-pixel blend weight toward the image branch; the fused
//! evaluation map is the union of both reliability maps.

use serde::{Deserialize, Serialize};

use crate::constants::{BLUR_KERNEL, BLUR_SIGMA, SOURCE_ATTRIBUTION};
use crate::error::{Error, Result};
use crate::filter::{average_axis, Axis, Kernel1d};
use crate::image::{ensure_same_dims, AlphaMatte, EvalMap, Mask, Plane};

/// `eval_i AND NOT eval_v`.
pub fn fusion_mask(eval_i: &EvalMap, eval_v: &EvalMap) -> Result<Mask> {
    Ok(eval_i.zip_with(eval_v, |i, v| i && !v)?.cast())
}

/// Separable Gaussian blur with reflect padding. Each pass is a weighted
/// average, so inputs in `[0, 1]` stay in `[0, 1]` and uniform regions are
/// reproduced exactly.
pub fn gaussian_blur(src: &Plane, kernel: usize, sigma: f64) -> Result<Plane> {
    let k = Kernel1d::gaussian(kernel, sigma)?;
    let tmp = average_axis(src, &k, Axis::Rows);
    Ok(average_axis(&tmp, &k, Axis::Cols))
}

/// Per-pixel convex combination `alpha_v·(1 − m) + alpha_i·m`.
pub fn blend(alpha_v: &AlphaMatte, alpha_i: &AlphaMatte, soft_mask: &Plane) -> Result<AlphaMatte> {
    ensure_same_dims(alpha_v, alpha_i)?;
    ensure_same_dims(alpha_v, soft_mask)?;
    if let Some((index, &value)) = soft_mask
        .as_slice()
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::RangeViolation { index, value });
    }
    let out: Vec<f64> = alpha_v
        .as_slice()
        .iter()
        .zip(alpha_i.as_slice())
        .zip(soft_mask.as_slice())
        .map(|((&v, &i), &m)| {
            if m == 0.0 {
                v
            } else if m == 1.0 {
                i
            } else {
                (v + m * (i - v)).clamp(v.min(i), v.max(i))
            }
        })
        .collect();
    AlphaMatte::from_vec(alpha_v.height(), alpha_v.width(), out)
}

/// Pixelwise OR of reliability.
pub fn union_eval(eval_v: &EvalMap, eval_i: &EvalMap) -> Result<EvalMap> {
    eval_v.zip_with(eval_i, |a, b| a || b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlurConfig {
    pub kernel: usize,
    pub sigma: f64,
}

impl Default for BlurConfig {
    fn default() -> Self {
        BlurConfig {
            kernel: BLUR_KERNEL,
            sigma: BLUR_SIGMA,
        }
    }
}

/// Pixel counts per dominant source. Reporting only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionStats {
    /// Pixels whose soft mask exceeds 0.5.
    pub image_dominated: usize,
    pub video_dominated: usize,
    /// Pixels in the binary fusion mask before blurring.
    pub fusion_region: usize,
    pub total: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FusionResult {
    pub alpha: AlphaMatte,
    pub eval: EvalMap,
    pub soft_mask: Plane,
    pub stats: FusionStats,
}

pub fn fuse_frame(
    alpha_v: &AlphaMatte,
    alpha_i: &AlphaMatte,
    eval_v: &EvalMap,
    eval_i: &EvalMap,
    blur: BlurConfig,
) -> Result<FusionResult> {
    ensure_same_dims(alpha_v, alpha_i)?;
    ensure_same_dims(alpha_v, eval_v)?;
    ensure_same_dims(alpha_v, eval_i)?;
    let hard = fusion_mask(eval_i, eval_v)?;
    let soft_mask = gaussian_blur(&hard.to_plane(), blur.kernel, blur.sigma)?;
    let alpha = blend(alpha_v, alpha_i, &soft_mask)?;
    let eval = union_eval(eval_v, eval_i)?;
    let image_dominated = soft_mask
        .as_slice()
        .iter()
        .filter(|&&m| m > SOURCE_ATTRIBUTION)
        .count();
    let total = soft_mask.as_slice().len();
    Ok(FusionResult {
        alpha,
        eval,
        soft_mask,
        stats: FusionStats {
            image_dominated,
            video_dominated: total - image_dominated,
            fusion_region: hard.count_ones(),
            total,
        },
    })
}
