//! Evaluator-versus-ground-truth correlation: patch pairing, uniform binning
//! along the ground-truth axis and Pearson correlation over raw pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalmap::PatchGrid;
use crate::image::{Dims, ProbMap};

/// `(ground-truth discrepancy, mean predicted error probability)` for one patch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub gt: f64,
    pub pred: f64,
}

/// Running mean; exact for constant input.
fn running_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut mean = 0.0;
    for (k, v) in values.enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

/// One pair per grid cell: the cell's normalized ground-truth score against
/// the mean of `p0` inside the cell.
pub fn collect_pairs(p0: &ProbMap, grid: &PatchGrid) -> Result<Vec<Pair>> {
    let (h, w) = p0.dims();
    let gh = grid.cells.last().map_or(0, |c| c.top + c.height);
    let gw = grid.cells.last().map_or(0, |c| c.left + c.width);
    if (gh, gw) != (h, w) {
        return Err(Error::DimensionMismatch {
            expected: (gh, gw),
            found: (h, w),
        });
    }
    let scores = grid
        .scores
        .as_ref()
        .ok_or_else(|| Error::invalid("grid carries no ground-truth scores"))?;
    grid.cells
        .iter()
        .zip(scores)
        .map(|(cell, &gt)| {
            let values = (cell.top..cell.top + cell.height)
                .flat_map(|r| (cell.left..cell.left + cell.width).map(move |c| (r, c)))
                .map(|idx| p0[idx]);
            Ok(Pair {
                gt,
                pred: running_mean(values),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub mean_pred: Option<f64>,
    /// Sample standard deviation (n − 1); absent for fewer than two pairs.
    pub std_pred: Option<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinnedCorrelation {
    pub bins: Vec<Bin>,
    /// `None` when either axis has zero variance or there are fewer than two pairs.
    pub pearson_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub null_reason: Option<String>,
    pub total_pairs: usize,
}

/// Pearson correlation over raw pairs, clamped to `[-1, 1]`.
pub fn pearson(pairs: &[Pair]) -> std::result::Result<f64, String> {
    if pairs.len() < 2 {
        return Err(format!("need at least 2 pairs, got {}", pairs.len()));
    }
    let mx = running_mean(pairs.iter().map(|p| p.gt));
    let my = running_mean(pairs.iter().map(|p| p.pred));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for p in pairs {
        let (dx, dy) = (p.gt - mx, p.pred - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err("zero variance".into());
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn bin_and_correlate(pairs: &[Pair], n_bins: usize) -> Result<BinnedCorrelation> {
    if n_bins == 0 {
        return Err(Error::invalid("need at least one bin"));
    }
    if let Some((index, p)) = pairs
        .iter()
        .enumerate()
        .find(|(_, p)| !(0.0..=1.0).contains(&p.gt) || !(0.0..=1.0).contains(&p.pred))
    {
        return Err(Error::RangeViolation {
            index,
            value: if (0.0..=1.0).contains(&p.gt) { p.pred } else { p.gt },
        });
    }
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for p in pairs {
        let k = ((p.gt * n_bins as f64) as usize).min(n_bins - 1);
        members[k].push(p.pred);
    }
    let bins = members
        .iter()
        .enumerate()
        .map(|(k, vals)| {
            let count = vals.len();
            let mean = (count > 0).then(|| vals.iter().sum::<f64>() / count as f64);
            let std = (count > 1).then(|| {
                let m = mean.unwrap();
                (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (count - 1) as f64).sqrt()
            });
            Bin {
                lower: k as f64 / n_bins as f64,
                upper: (k + 1) as f64 / n_bins as f64,
                mean_pred: mean,
                std_pred: std,
                count,
            }
        })
        .collect();
    let (pearson_r, null_reason) = match pearson(pairs) {
        Ok(r) => (Some(r), None),
        Err(reason) => (None, Some(reason)),
    };
    Ok(BinnedCorrelation {
        bins,
        pearson_r,
        null_reason,
        total_pairs: pairs.len(),
    })
}

impl BinnedCorrelation {
    /// `bin_lower,bin_upper,mean_pred,std_pred,count` rows; empty fields for
    /// undefined statistics.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from("bin_lower,bin_upper,mean_pred,std_pred,count\n");
        for b in &self.bins {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                b.lower,
                b.upper,
                opt(b.mean_pred),
                opt(b.std_pred),
                b.count
            ));
        }
        out
    }
}
