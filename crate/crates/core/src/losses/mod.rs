//! Training objectives with analytic gradients.
//!
//! Every `grad` is the derivative of `value` with respect to the first map
//! argument of the function that produced it.

mod pyramid;

pub use pyramid::{
    effective_levels, expand, expand_adjoint, laplacian_pyramid, max_levels, reduce, reduce_adjoint,
    LaplacianPyramid,
};

use serde::{Deserialize, Serialize};

use crate::constants::{
    pyramid_weight, FOCAL_ALPHA, FOCAL_GAMMA, LAMBDA_EVAL, LOSS_EPSILON, PROB_CLAMP,
    PYRAMID_LEVELS,
};
use crate::error::{Error, Result};
use crate::image::{ensure_same_dims, Dims, EvalMap, Plane, ProbMap};

#[derive(Clone, Debug, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub grad: Option<Plane>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `Σ R·|pred − gt| / (Σ R + ε)`.
pub fn masked_l1(pred: &Plane, gt: &Plane, reliable: &EvalMap, epsilon: f64) -> Result<LossValue> {
    ensure_same_dims(pred, gt)?;
    ensure_same_dims(pred, reliable)?;
    let denom = reliable.count_ones() as f64 + epsilon;
    let r = reliable.as_slice();
    let mut value = 0.0;
    let mut grad = Plane::zeros(pred.height(), pred.width());
    for (i, (&p, &g)) in pred.as_slice().iter().zip(gt.as_slice()).enumerate() {
        if r[i] == 1 {
            value += (p - g).abs();
            grad.as_mut_slice()[i] = sign(p - g) / denom;
        }
    }
    Ok(LossValue {
        value: value / denom,
        grad: Some(grad),
    })
}

/// Multi-scale masked L1 on Laplacian bands, weighted `2^(s-1)/5`. Band
/// differences are expanded back to full resolution before the reliability
/// mask is applied.
pub fn masked_laplacian_loss(
    pred: &Plane,
    gt: &Plane,
    reliable: &EvalMap,
    levels: usize,
    epsilon: f64,
) -> Result<LossValue> {
    ensure_same_dims(pred, gt)?;
    ensure_same_dims(pred, reliable)?;
    let pp = laplacian_pyramid(pred, levels)?;
    let pg = laplacian_pyramid(gt, levels)?;
    let used = pp.levels();
    let dims = pyramid::level_dims(pred.dims(), used);
    let denom = reliable.count_ones() as f64 + epsilon;
    let r = reliable.as_slice();

    let mut value = 0.0;
    let mut cotangents = Vec::with_capacity(used);
    for s in 0..used {
        let weight = pyramid_weight(s + 1);
        let diff = pp.bands[s].zip_map(&pg.bands[s], |a, b| a - b)?;
        let full = pyramid::upsample_to_full(&diff, s, &dims);
        let mut seed = Plane::zeros(pred.height(), pred.width());
        let mut band_sum = 0.0;
        for (i, &u) in full.as_slice().iter().enumerate() {
            if r[i] == 1 {
                band_sum += u.abs();
                seed.as_mut_slice()[i] = weight * sign(u) / denom;
            }
        }
        value += weight * band_sum / denom;
        cotangents.push(pyramid::upsample_to_full_adjoint(&seed, s));
    }
    Ok(LossValue {
        value,
        grad: Some(pyramid::pyramid_adjoint(&cotangents, &dims)),
    })
}

/// Temporal-coherence loss on pixels reliable in both frames. The gradient is
/// with respect to `pred_t`; the gradient with respect to `pred_prev` is its
/// negation.
#[allow(clippy::too_many_arguments)]
pub fn masked_tc_loss(
    pred_t: &Plane,
    pred_prev: &Plane,
    gt_t: &Plane,
    gt_prev: &Plane,
    reliable_t: &EvalMap,
    reliable_prev: &EvalMap,
    epsilon: f64,
) -> Result<LossValue> {
    for other in [pred_prev, gt_t, gt_prev] {
        ensure_same_dims(pred_t, other)?;
    }
    ensure_same_dims(pred_t, reliable_t)?;
    ensure_same_dims(pred_t, reliable_prev)?;
    let both = reliable_t.zip_with(reliable_prev, |a, b| a && b)?;
    let denom = both.count_ones() as f64 + epsilon;
    let mut value = 0.0;
    let mut grad = Plane::zeros(pred_t.height(), pred_t.width());
    for (i, &m) in both.as_slice().iter().enumerate() {
        if m == 1 {
            let e = (pred_t.as_slice()[i] - pred_prev.as_slice()[i])
                - (gt_t.as_slice()[i] - gt_prev.as_slice()[i]);
            value += e * e;
            grad.as_mut_slice()[i] = 2.0 * e / denom;
        }
    }
    Ok(LossValue {
        value: value / denom,
        grad: Some(grad),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FocalConfig {
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for FocalConfig {
    fn default() -> Self {
        FocalConfig {
            gamma: FOCAL_GAMMA,
            alpha: FOCAL_ALPHA,
        }
    }
}

/// Mean focal loss over pixels. `p` is the probability of the reliable class
/// and is clamped to `[1e-7, 1 − 1e-7]`; the gradient is zero where the clamp
/// is active.
pub fn focal_loss(p: &Plane, y: &EvalMap, cfg: FocalConfig) -> Result<LossValue> {
    ensure_same_dims(p, y)?;
    let n = p.pixel_count() as f64;
    let (a, gamma) = (cfg.alpha, cfg.gamma);
    let mut value = 0.0;
    let mut grad = Plane::zeros(p.height(), p.width());
    for (i, (&raw, &label)) in p.as_slice().iter().zip(y.as_slice()).enumerate() {
        let q = raw.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let (dq, loss) = if label == 1 {
            let loss = -a * (1.0 - q).powf(gamma) * q.ln();
            let d = -a * (-gamma * (1.0 - q).powf(gamma - 1.0) * q.ln() + (1.0 - q).powf(gamma) / q);
            (d, loss)
        } else {
            let loss = -(1.0 - a) * q.powf(gamma) * (1.0 - q).ln();
            let d = -(1.0 - a) * (gamma * q.powf(gamma - 1.0) * (1.0 - q).ln() - q.powf(gamma) / (1.0 - q));
            (d, loss)
        };
        value += loss;
        if raw == q {
            grad.as_mut_slice()[i] = dq / n;
        }
    }
    Ok(LossValue {
        value: value / n,
        grad: Some(grad),
    })
}

/// `1 − (2 Σ p·y + s) / (Σ p + Σ y + s)`.
pub fn dice_loss(p: &Plane, y: &EvalMap, smooth: f64) -> Result<LossValue> {
    ensure_same_dims(p, y)?;
    let ys = y.as_slice();
    let inter: f64 = p.as_slice().iter().zip(ys).map(|(&v, &l)| v * l as f64).sum();
    let num = 2.0 * inter + smooth;
    let den = p.sum() + y.count_ones() as f64 + smooth;
    let grad = Plane::new(
        p.height(),
        p.width(),
        ys.iter()
            .map(|&l| -(2.0 * l as f64 * den - num) / (den * den))
            .collect(),
    )?;
    Ok(LossValue {
        value: 1.0 - num / den,
        grad: Some(grad),
    })
}

/// Pixel-mean of the error probability map.
pub fn eval_guidance_loss(p0: &ProbMap) -> LossValue {
    let n = p0.pixel_count();
    LossValue {
        value: p0.plane().mean(),
        grad: Some(Plane::filled(p0.height(), p0.width(), 1.0 / n as f64)),
    }
}

/// Focal + dice, gradients summed. `p` is the reliable-class probability.
pub fn mqe_total_loss(p: &Plane, y: &EvalMap, focal: FocalConfig, smooth: f64) -> Result<LossValue> {
    let f = focal_loss(p, y, focal)?;
    let d = dice_loss(p, y, smooth)?;
    let grad = f.grad.unwrap().zip_map(&d.grad.unwrap(), |a, b| a + b)?;
    Ok(LossValue {
        value: f.value + d.value,
        grad: Some(grad),
    })
}

/// One frame of a training window.
#[derive(Clone, Copy, Debug)]
pub struct LossFrame<'a> {
    pub pred: &'a Plane,
    pub gt: &'a Plane,
    pub reliable: &'a EvalMap,
    pub p0: Option<&'a ProbMap>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MattingLossConfig {
    pub lambda_eval: f64,
    pub levels: usize,
    pub epsilon: f64,
}

impl Default for MattingLossConfig {
    fn default() -> Self {
        MattingLossConfig {
            lambda_eval: LAMBDA_EVAL,
            levels: PYRAMID_LEVELS,
            epsilon: LOSS_EPSILON,
        }
    }
}

/// Breakdown of the masked matting objective for a window.
#[derive(Clone, Debug, PartialEq)]
pub struct MattingLoss {
    pub value: f64,
    /// Frame means of the masked L1 and Laplacian terms.
    pub l1: f64,
    pub lap: f64,
    /// Mean over consecutive pairs; 0 for single frames.
    pub tc: f64,
    /// Frame mean of the guidance term, unweighted.
    pub eval: f64,
    /// Gradient with respect to each frame's prediction.
    pub pred_grads: Vec<Plane>,
    /// Gradient with respect to each frame's error-probability map.
    pub p0_grads: Vec<Option<Plane>>,
}

pub fn matting_total_loss(frames: &[LossFrame<'_>], cfg: MattingLossConfig) -> Result<MattingLoss> {
    if frames.is_empty() {
        return Err(Error::SequenceTooShort {
            required: 1,
            found: 0,
        });
    }
    let nf = frames.len() as f64;
    let mut l1 = 0.0;
    let mut lap = 0.0;
    let mut pred_grads = Vec::with_capacity(frames.len());
    for f in frames {
        let a = masked_l1(f.pred, f.gt, f.reliable, cfg.epsilon)?;
        let b = masked_laplacian_loss(f.pred, f.gt, f.reliable, cfg.levels, cfg.epsilon)?;
        l1 += a.value;
        lap += b.value;
        let g = a.grad.unwrap().zip_map(&b.grad.unwrap(), |x, y| (x + y) / nf)?;
        pred_grads.push(g);
    }
    l1 /= nf;
    lap /= nf;

    let mut tc = 0.0;
    if frames.len() >= 2 {
        let pairs = (frames.len() - 1) as f64;
        for t in 1..frames.len() {
            let (cur, prev) = (&frames[t], &frames[t - 1]);
            let loss = masked_tc_loss(
                cur.pred,
                prev.pred,
                cur.gt,
                prev.gt,
                cur.reliable,
                prev.reliable,
                cfg.epsilon,
            )?;
            tc += loss.value / pairs;
            let g = loss.grad.unwrap();
            for (i, &v) in g.as_slice().iter().enumerate() {
                pred_grads[t].as_mut_slice()[i] += v / pairs;
                pred_grads[t - 1].as_mut_slice()[i] -= v / pairs;
            }
        }
    }

    let with_p0 = frames.iter().filter(|f| f.p0.is_some()).count();
    let mut eval = 0.0;
    let p0_grads = frames
        .iter()
        .map(|f| {
            f.p0.map(|p0| {
                let loss = eval_guidance_loss(p0);
                eval += loss.value / with_p0 as f64;
                let scale = cfg.lambda_eval / with_p0 as f64;
                loss.grad.unwrap().map(|v| v * scale)
            })
        })
        .collect();

    Ok(MattingLoss {
        value: l1 + lap + tc + cfg.lambda_eval * eval,
        l1,
        lap,
        tc,
        eval,
        pred_grads,
        p0_grads,
    })
}
