//! Reference-based matting metrics.
//!
//! Scaling: MAD, MSE, Grad and Conn are reported ×10³, dtSSD ×10².

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::constants::{CONN_STEP, CONN_TOLERANCE, GRAD_SIGMA};
use crate::error::{Error, Result};
use crate::filter::{convolve_separable, Kernel1d};
use crate::image::{ensure_same_dims, AlphaMatte, Dims, Mask, Plane};

pub const SCORE_SCALE: f64 = 1e3;
pub const DTSSD_SCALE: f64 = 1e2;

/// Per-frame or per-sequence metric summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mad: f64,
    pub mse: f64,
    pub grad: f64,
    pub conn: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dtssd: Option<f64>,
    pub frame_count: usize,
}

fn region_mean(
    pred: &AlphaMatte,
    gt: &AlphaMatte,
    region: Option<&Mask>,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    ensure_same_dims(pred, gt)?;
    let diffs = pred.as_slice().iter().zip(gt.as_slice()).map(|(p, g)| f(p - g));
    match region {
        None => Ok(diffs.sum::<f64>() / pred.pixel_count() as f64),
        Some(mask) => {
            ensure_same_dims(pred, mask)?;
            let mut sum = 0.0;
            let mut n = 0usize;
            for (d, &m) in diffs.zip(mask.as_slice()) {
                if m == 1 {
                    sum += d;
                    n += 1;
                }
            }
            if n == 0 {
                return Err(Error::EmptyRegion);
            }
            Ok(sum / n as f64)
        }
    }
}

/// Mean absolute difference ×10³.
pub fn mad(pred: &AlphaMatte, gt: &AlphaMatte, region: Option<&Mask>) -> Result<f64> {
    Ok(region_mean(pred, gt, region, f64::abs)? * SCORE_SCALE)
}

/// Mean squared difference ×10³.
pub fn mse(pred: &AlphaMatte, gt: &AlphaMatte, region: Option<&Mask>) -> Result<f64> {
    Ok(region_mean(pred, gt, region, |d| d * d)? * SCORE_SCALE)
}

/// Gradient magnitude from first-order Gaussian-derivative filters.
pub fn gaussian_gradient_magnitude(img: &Plane, sigma: f64) -> Result<Plane> {
    let smooth = Kernel1d::gaussian_truncated(sigma)?;
    let deriv = Kernel1d::gaussian_derivative(sigma)?;
    let gx = convolve_separable(img, &deriv, &smooth);
    let gy = convolve_separable(img, &smooth, &deriv);
    gx.zip_map(&gy, |x, y| (x * x + y * y).sqrt())
}

/// Grad with the default σ = 1.4.
pub fn grad_metric(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<f64> {
    grad_metric_with(pred, gt, GRAD_SIGMA)
}

pub fn grad_metric_with(pred: &AlphaMatte, gt: &AlphaMatte, sigma: f64) -> Result<f64> {
    ensure_same_dims(pred, gt)?;
    let gp = gaussian_gradient_magnitude(pred.plane(), sigma)?;
    let gg = gaussian_gradient_magnitude(gt.plane(), sigma)?;
    let sq = gp.zip_map(&gg, |a, b| (a - b) * (a - b))?;
    Ok(sq.mean() * SCORE_SCALE)
}

/// Parameters of the connectivity metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnConfig {
    pub step: f64,
    pub tolerance: f64,
}

impl Default for ConnConfig {
    fn default() -> Self {
        ConnConfig {
            step: CONN_STEP,
            tolerance: CONN_TOLERANCE,
        }
    }
}

impl ConnConfig {
    /// Thresholds `step, 2·step, …` up to 1.0 inclusive.
    pub fn thresholds(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.step <= 1.0) {
            return Err(Error::invalid(format!("conn step must lie in (0, 1], got {}", self.step)));
        }
        let n = (1.0 / self.step).round() as usize;
        Ok((1..=n).map(|k| k as f64 / n as f64).collect())
    }
}

/// Largest 4-connected component of `set`. Ties go to the component whose
/// first pixel in row-major order comes first. Returns an all-false mask when
/// `set` is empty.
pub(crate) fn largest_component(set: &[bool], height: usize, width: usize) -> Vec<bool> {
    let mut label = vec![usize::MAX; set.len()];
    let mut best: Option<(usize, usize)> = None; // (label, size)
    let mut queue = VecDeque::new();
    let mut next = 0usize;
    for start in 0..set.len() {
        if !set[start] || label[start] != usize::MAX {
            continue;
        }
        let id = next;
        next += 1;
        let mut size = 0usize;
        label[start] = id;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            size += 1;
            let (r, c) = (p / width, p % width);
            let mut visit = |q: usize| {
                if set[q] && label[q] == usize::MAX {
                    label[q] = id;
                    queue.push_back(q);
                }
            };
            if r > 0 {
                visit(p - width);
            }
            if r + 1 < height {
                visit(p + width);
            }
            if c > 0 {
                visit(p - 1);
            }
            if c + 1 < width {
                visit(p + 1);
            }
        }
        if best.is_none_or(|(_, s)| size > s) {
            best = Some((id, size));
        }
    }
    match best {
        Some((id, _)) => label.iter().map(|&l| l == id).collect(),
        None => vec![false; set.len()],
    }
}

/// Connectivity error ×10³ with the default step and tolerance.
pub fn conn_metric(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<f64> {
    conn_metric_with(pred, gt, ConnConfig::default())
}

pub fn conn_metric_with(pred: &AlphaMatte, gt: &AlphaMatte, cfg: ConnConfig) -> Result<f64> {
    ensure_same_dims(pred, gt)?;
    let (h, w) = pred.dims();
    let p = pred.as_slice();
    let g = gt.as_slice();
    // l[i] = largest threshold at which pixel i lies in the common component.
    let mut level = vec![0.0; p.len()];
    for theta in cfg.thresholds()? {
        let both: Vec<bool> = p.iter().zip(g).map(|(&a, &b)| a >= theta && b >= theta).collect();
        for (l, inside) in level.iter_mut().zip(largest_component(&both, h, w)) {
            if inside {
                *l = theta;
            }
        }
    }
    let phi = |d: f64| if d >= cfg.tolerance { 1.0 - d } else { 1.0 };
    let total: f64 = p
        .iter()
        .zip(g)
        .zip(&level)
        .map(|((&a, &b), &l)| (phi(a - l) - phi(b - l)).abs())
        .sum();
    Ok(total / p.len() as f64 * SCORE_SCALE)
}

/// Temporal coherence error ×10² over consecutive frame differences.
pub fn dtssd(pred_seq: &[AlphaMatte], gt_seq: &[AlphaMatte], region: Option<&Mask>) -> Result<f64> {
    if pred_seq.len() != gt_seq.len() {
        return Err(Error::LengthMismatch(pred_seq.len(), gt_seq.len()));
    }
    if pred_seq.len() < 2 {
        return Err(Error::SequenceTooShort {
            required: 2,
            found: pred_seq.len(),
        });
    }
    let first = &pred_seq[0];
    for frame in pred_seq.iter().chain(gt_seq) {
        ensure_same_dims(first, frame)?;
    }
    if let Some(mask) = region {
        ensure_same_dims(first, mask)?;
        if mask.count_ones() == 0 {
            return Err(Error::EmptyRegion);
        }
    }
    let mut total = 0.0;
    for t in 1..pred_seq.len() {
        let (p1, p0) = (pred_seq[t].as_slice(), pred_seq[t - 1].as_slice());
        let (g1, g0) = (gt_seq[t].as_slice(), gt_seq[t - 1].as_slice());
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..p1.len() {
            if region.is_some_and(|m| m.as_slice()[i] == 0) {
                continue;
            }
            let e = (p1[i] - p0[i]) - (g1[i] - g0[i]);
            sum += e * e;
            n += 1;
        }
        total += (sum / n as f64).sqrt();
    }
    Ok(total / (pred_seq.len() - 1) as f64 * DTSSD_SCALE)
}

/// MAD, MSE, Grad and Conn of a single frame.
pub fn frame_report(pred: &AlphaMatte, gt: &AlphaMatte) -> Result<MetricReport> {
    Ok(MetricReport {
        mad: mad(pred, gt, None)?,
        mse: mse(pred, gt, None)?,
        grad: grad_metric(pred, gt)?,
        conn: conn_metric(pred, gt)?,
        dtssd: None,
        frame_count: 1,
    })
}

/// Frame-averaged MAD/MSE/Grad/Conn plus dtSSD when the sequence has two or
/// more frames. Means are accumulated in frame order.
pub fn sequence_report(pred_seq: &[AlphaMatte], gt_seq: &[AlphaMatte]) -> Result<MetricReport> {
    if pred_seq.len() != gt_seq.len() {
        return Err(Error::LengthMismatch(pred_seq.len(), gt_seq.len()));
    }
    if pred_seq.is_empty() {
        return Err(Error::SequenceTooShort {
            required: 1,
            found: 0,
        });
    }
    let frames = pred_seq
        .iter()
        .zip(gt_seq)
        .map(|(p, g)| frame_report(p, g))
        .collect::<Result<Vec<_>>>()?;
    let n = frames.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| frames.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        mad: mean(|r| r.mad),
        mse: mean(|r| r.mse),
        grad: mean(|r| r.grad),
        conn: mean(|r| r.conn),
        dtssd: if frames.len() >= 2 {
            Some(dtssd(pred_seq, gt_seq, None)?)
        } else {
            None
        },
        frame_count: frames.len(),
    })
}
