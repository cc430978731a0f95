//! Patch-level pseudo ground-truth evaluation maps, the ground-truth oracle
//! evaluator, the evaluator plug-in interface and the non-reference error
//! rates (ERR / MER / BER).

use serde::{Deserialize, Serialize};

use crate::constants::{DELTA, GRAD_SIGMA, GRID_COLS, GRID_ROWS, WEIGHT_GRAD, WEIGHT_MAD};
use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, AlphaMatte, Dims, EvalMap, Mask, Plane, ProbMap, Rect, RgbFrame, SegMask};
use crate::metrics::{grad_metric_with, mad};
use crate::morphology::boundary_band as band;

/// Non-overlapping tiling of an image into `rows × cols` cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub rows: usize,
    pub cols: usize,
    /// Row-major cell rectangles.
    pub cells: Vec<Rect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
}

/// Splits `len` into `parts` spans differing by at most one; the first
/// `len % parts` spans get the extra pixel.
fn spans(len: usize, parts: usize) -> Vec<(usize, usize)> {
    let base = len / parts;
    let rem = len % parts;
    let mut start = 0;
    (0..parts)
        .map(|i| {
            let size = base + usize::from(i < rem);
            let span = (start, size);
            start += size;
            span
        })
        .collect()
}

pub fn make_patch_grid(height: usize, width: usize, rows: usize, cols: usize) -> Result<PatchGrid> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("grid must have at least one row and column"));
    }
    if height < rows || width < cols {
        return Err(Error::ImageTooSmall {
            height,
            width,
            rows,
            cols,
        });
    }
    let row_spans = spans(height, rows);
    let col_spans = spans(width, cols);
    let cells = row_spans
        .iter()
        .flat_map(|&(top, h)| {
            col_spans.iter().map(move |&(left, w)| Rect {
                top,
                left,
                height: h,
                width: w,
            })
        })
        .collect();
    Ok(PatchGrid {
        rows,
        cols,
        cells,
        scores: None,
    })
}

impl PatchGrid {
    pub fn height(&self) -> usize {
        self.cells.last().map_or(0, |c| c.top + c.height)
    }

    pub fn width(&self) -> usize {
        self.cells.last().map_or(0, |c| c.left + c.width)
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        if scores.len() != self.cells.len() {
            return Err(Error::LengthMismatch(scores.len(), self.cells.len()));
        }
        self.scores = Some(scores);
        Ok(self)
    }

    fn check(&self, img: &impl Dims) -> Result<()> {
        if img.dims() != (self.height(), self.width()) {
            return Err(Error::DimensionMismatch {
                expected: (self.height(), self.width()),
                found: img.dims(),
            });
        }
        Ok(())
    }

    /// Writes one value per cell into every pixel of that cell.
    pub fn broadcast(&self, per_cell: &[f64]) -> Plane {
        let mut out = Plane::zeros(self.height(), self.width());
        for (cell, &v) in self.cells.iter().zip(per_cell) {
            for r in cell.top..cell.top + cell.height {
                for c in cell.left..cell.left + cell.width {
                    out[(r, c)] = v;
                }
            }
        }
        out
    }
}

/// Settings for the patch discrepancy `w_mad·MAD + w_grad·Grad` and its threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyConfig {
    pub rows: usize,
    pub cols: usize,
    pub w_mad: f64,
    pub w_grad: f64,
    pub grad_sigma: f64,
    pub delta: f64,
}

impl Default for DiscrepancyConfig {
    fn default() -> Self {
        DiscrepancyConfig {
            rows: GRID_ROWS,
            cols: GRID_COLS,
            w_mad: WEIGHT_MAD,
            w_grad: WEIGHT_GRAD,
            grad_sigma: GRAD_SIGMA,
            delta: DELTA,
        }
    }
}

impl DiscrepancyConfig {
    pub fn grid_for(&self, img: &impl Dims) -> Result<PatchGrid> {
        let (h, w) = img.dims();
        make_patch_grid(h, w, self.rows, self.cols)
    }
}

/// Raw (unnormalized) per-cell discrepancy, each cell scored on its own crop.
pub fn patch_discrepancy(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    grid: &PatchGrid,
    cfg: &DiscrepancyConfig,
) -> Result<Vec<f64>> {
    ensure_same_dims(pred, gt)?;
    grid.check(pred)?;
    grid.cells
        .iter()
        .map(|&cell| {
            let p = AlphaMatte::from_plane_clamped(pred.plane().crop(cell));
            let g = AlphaMatte::from_plane_clamped(gt.plane().crop(cell));
            Ok(cfg.w_mad * mad(&p, &g, None)? + cfg.w_grad * grad_metric_with(&p, &g, cfg.grad_sigma)?)
        })
        .collect()
}

/// Affine map of `scores` onto `[0, 1]`; a constant input maps to all zeros.
pub fn normalize_minmax(scores: &[f64]) -> Vec<f64> {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return vec![0.0; scores.len()];
    }
    let span = max - min;
    scores.iter().map(|&s| (s - min) / span).collect()
}

/// Normalized per-cell discrepancy together with the grid that produced it.
pub fn normalized_discrepancy(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    cfg: &DiscrepancyConfig,
) -> Result<PatchGrid> {
    ensure_same_dims(pred, gt)?;
    let grid = cfg.grid_for(pred)?;
    let raw = patch_discrepancy(pred, gt, &grid, cfg)?;
    grid.with_scores(normalize_minmax(&raw))
}

/// Pseudo ground-truth evaluation map: a cell is reliable iff its normalized
/// discrepancy is below `delta`.
pub fn pseudo_gt_map(pred: &AlphaMatte, gt: &AlphaMatte, cfg: &DiscrepancyConfig) -> Result<EvalMap> {
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {}", cfg.delta)));
    }
    let grid = normalized_discrepancy(pred, gt, cfg)?;
    let scores = grid.scores.as_deref().unwrap_or_default();
    let reliable: Vec<f64> = scores
        .iter()
        .map(|&s| if s < cfg.delta { 1.0 } else { 0.0 })
        .collect();
    let plane = grid.broadcast(&reliable);
    EvalMap::from_bools(
        plane.height(),
        plane.width(),
        plane.as_slice().iter().map(|&v| v == 1.0),
    )
}

/// Ground-truth stand-in for a learned evaluator: normalized per-cell
/// discrepancy broadcast to pixels, read as error probability.
pub fn oracle_prob_map(pred: &AlphaMatte, gt: &AlphaMatte, cfg: &DiscrepancyConfig) -> Result<ProbMap> {
    let grid = normalized_discrepancy(pred, gt, cfg)?;
    let plane = grid.broadcast(grid.scores.as_deref().unwrap_or_default());
    ProbMap::new(plane)
}

/// Boundary band of a segmentation mask: dilation XOR erosion with a square
/// of side `2·width + 1`.
pub fn boundary_band(mask: &SegMask, width: usize) -> Result<Mask> {
    band(mask, width)
}

/// Which matting branch an evaluation request belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Temporally stable video-matting output.
    Video,
    /// Detail-preserving image-matting output.
    Image,
    /// A standalone prediction outside the dual-branch pipeline.
    Single,
}

impl Branch {
    pub fn tag(self) -> &'static str {
        match self {
            Branch::Video => "v",
            Branch::Image => "i",
            Branch::Single => "pred",
        }
    }
}

/// Everything an evaluator may look at for one frame.
#[derive(Clone, Copy, Debug)]
pub struct EvaluatorInput<'a> {
    pub frame_id: &'a str,
    pub branch: Branch,
    pub rgb: Option<&'a RgbFrame>,
    pub alpha: &'a AlphaMatte,
    pub seg: Option<&'a SegMask>,
    /// Only the oracle evaluator uses ground truth.
    pub gt: Option<&'a AlphaMatte>,
}

/// Maps `(frame, alpha, segmentation)` to a per-pixel error probability.
pub trait Evaluator: Send + Sync {
    fn name(&self) -> &str;

    fn probability_map(&self, input: &EvaluatorInput<'_>) -> Result<ProbMap>;
}

/// Runs `evaluator` and checks that its output matches the input size.
pub fn evaluate(evaluator: &dyn Evaluator, input: &EvaluatorInput<'_>) -> Result<ProbMap> {
    let p = evaluator.probability_map(input)?;
    ensure_same_dims(input.alpha, &p)?;
    Ok(p)
}

/// Evaluator backed by [`oracle_prob_map`]; requires ground truth.
#[derive(Clone, Debug, Default)]
pub struct OracleEvaluator {
    pub config: DiscrepancyConfig,
}

impl Evaluator for OracleEvaluator {
    fn name(&self) -> &str {
        "oracle"
    }

    fn probability_map(&self, input: &EvaluatorInput<'_>) -> Result<ProbMap> {
        let gt = input.gt.ok_or_else(|| Error::MissingInput {
            frame: input.frame_id.to_string(),
            what: "ground-truth alpha required by the oracle evaluator".into(),
        })?;
        oracle_prob_map(input.alpha, gt, &self.config)
    }
}

/// Percentages of unreliable pixels overall, in the foreground and in the
/// boundary band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonRefReport {
    pub err: f64,
    pub mer: f64,
    pub ber: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

pub fn nonref_metrics(eval: &EvalMap, seg: &SegMask, band_width: usize) -> Result<NonRefReport> {
    ensure_same_dims(eval, seg)?;
    let band = boundary_band(seg, band_width)?;
    let e = eval.as_slice();
    let s = seg.as_slice();
    let b = band.as_slice();
    let mut warnings = Vec::new();
    let mut rate = |name: &str, region: &dyn Fn(usize) -> bool| {
        let (mut bad, mut total) = (0usize, 0usize);
        for i in 0..e.len() {
            if region(i) {
                total += 1;
                bad += usize::from(e[i] == 0);
            }
        }
        if total == 0 {
            warnings.push(format!("{name}: empty region, reported as 0"));
            0.0
        } else {
            100.0 * bad as f64 / total as f64
        }
    };
    let err = rate("ERR", &|_| true);
    let mer = rate("MER", &|i| s[i] == 1);
    let ber = rate("BER", &|i| b[i] == 1);
    Ok(NonRefReport {
        err,
        mer,
        ber,
        warnings,
    })
}
