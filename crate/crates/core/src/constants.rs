//! Default parameters. The CLI exposes each of these as an overridable flag
//! and every run report echoes them.

use serde::Serialize;

/// Grid used for patch-level discrepancy (rows, cols).
pub const GRID_ROWS: usize = 7;
pub const GRID_COLS: usize = 7;
/// Normalized discrepancy below this marks a patch reliable.
pub const DELTA: f64 = 0.2;
/// Weights of MAD and Grad in the patch discrepancy.
pub const WEIGHT_MAD: f64 = 0.9;
pub const WEIGHT_GRAD: f64 = 0.1;
/// Probability threshold turning an error-probability map into an evaluation map.
pub const PROB_THRESHOLD: f64 = 0.5;

pub const GRAD_SIGMA: f64 = 1.4;
pub const CONN_STEP: f64 = 0.1;
pub const CONN_TOLERANCE: f64 = 0.15;

/// Fusion-mask Gaussian blur.
pub const BLUR_KERNEL: usize = 9;
pub const BLUR_SIGMA: f64 = 5.0;
/// Soft-mask value above which a fused pixel is attributed to the image branch.
pub const SOURCE_ATTRIBUTION: f64 = 0.5;

pub const BAND_WIDTH: usize = 10;

pub const FOCAL_GAMMA: f64 = 2.0;
pub const FOCAL_ALPHA: f64 = 0.25;
pub const DICE_SMOOTH: f64 = 1.0;
pub const PROB_CLAMP: f64 = 1e-7;
pub const LOSS_EPSILON: f64 = 1e-6;
pub const LAMBDA_EVAL: f64 = 0.1;
pub const PYRAMID_LEVELS: usize = 5;

/// Weight of Laplacian band `s` (1-based): `2^(s-1) / 5`.
pub fn pyramid_weight(s: usize) -> f64 {
    (1u64 << (s - 1)) as f64 / 5.0
}

pub const WINDOW: usize = 8;
pub const DROPOUT_BOUNDARY_MAX: usize = 3;
pub const DROPOUT_NONBOUNDARY_MAX: usize = 1;
pub const DROPOUT_SIDE_MIN: usize = 50;
pub const DROPOUT_SIDE_MAX: usize = 100;
/// Alpha level at which a reference frame is binarized before taking its boundary band.
pub const DROPOUT_ALPHA_CUT: f64 = 0.5;

pub const COVERAGE_THRESHOLD: f64 = 0.9;
pub const ASSIGN_THRESHOLD: f64 = 0.5;
pub const FRAGMENT_MIN_FILL: f64 = 0.3;

pub const CORRELATION_BINS: usize = 30;

/// Snapshot of every default, serialized into run reports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantsEcho {
    pub grid: [usize; 2],
    pub delta: f64,
    pub discrepancy_weights: [f64; 2],
    pub prob_threshold: f64,
    pub grad_sigma: f64,
    pub conn_step: f64,
    pub conn_tolerance: f64,
    pub blur_kernel: usize,
    pub blur_sigma: f64,
    pub band_width: usize,
    pub focal_gamma: f64,
    pub focal_alpha: f64,
    pub dice_smooth: f64,
    pub lambda_eval: f64,
    pub pyramid_levels: usize,
    pub pyramid_weights: Vec<f64>,
    pub window: usize,
    pub dropout_boundary_patches: [usize; 2],
    pub dropout_nonboundary_patches: [usize; 2],
    pub dropout_patch_side: [usize; 2],
    pub coverage_threshold: f64,
    pub assign_threshold: f64,
    pub fragment_min_fill: f64,
    pub correlation_bins: usize,
}

impl Default for ConstantsEcho {
    fn default() -> Self {
        ConstantsEcho {
            grid: [GRID_ROWS, GRID_COLS],
            delta: DELTA,
            discrepancy_weights: [WEIGHT_MAD, WEIGHT_GRAD],
            prob_threshold: PROB_THRESHOLD,
            grad_sigma: GRAD_SIGMA,
            conn_step: CONN_STEP,
            conn_tolerance: CONN_TOLERANCE,
            blur_kernel: BLUR_KERNEL,
            blur_sigma: BLUR_SIGMA,
            band_width: BAND_WIDTH,
            focal_gamma: FOCAL_GAMMA,
            focal_alpha: FOCAL_ALPHA,
            dice_smooth: DICE_SMOOTH,
            lambda_eval: LAMBDA_EVAL,
            pyramid_levels: PYRAMID_LEVELS,
            pyramid_weights: (1..=PYRAMID_LEVELS).map(pyramid_weight).collect(),
            window: WINDOW,
            dropout_boundary_patches: [0, DROPOUT_BOUNDARY_MAX],
            dropout_nonboundary_patches: [0, DROPOUT_NONBOUNDARY_MAX],
            dropout_patch_side: [DROPOUT_SIDE_MIN, DROPOUT_SIDE_MAX],
            coverage_threshold: COVERAGE_THRESHOLD,
            assign_threshold: ASSIGN_THRESHOLD,
            fragment_min_fill: FRAGMENT_MIN_FILL,
            correlation_bins: CORRELATION_BINS,
        }
    }
}
