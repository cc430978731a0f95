//! Laplacian pyramid built from a 5-tap binomial filter, plus the adjoints
//! needed to back-propagate through it.

use log::warn;

use crate::error::{Error, Result};
use crate::filter::{convolve_axis, convolve_axis_adjoint, Axis, Kernel1d};
use crate::image::{Dims, Plane};

fn binomial() -> Kernel1d {
    Kernel1d::new(vec![1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0]).expect("odd length")
}

fn blur(x: &Plane) -> Plane {
    let k = binomial();
    convolve_axis(&convolve_axis(x, &k, Axis::Rows), &k, Axis::Cols)
}

fn blur_adjoint(x: &Plane) -> Plane {
    let k = binomial();
    convolve_axis_adjoint(&convolve_axis_adjoint(x, &k, Axis::Cols), &k, Axis::Rows)
}

fn decimate(x: &Plane) -> Plane {
    let (h, w) = (x.height() / 2, x.width() / 2);
    Plane::from_fn(h, w, |r, c| x[(2 * r, 2 * c)])
}

/// Adjoint of [`decimate`]: places samples on even positions of a zero
/// `height × width` plane.
fn zero_insert(y: &Plane, height: usize, width: usize) -> Plane {
    let mut out = Plane::zeros(height, width);
    for r in 0..y.height() {
        for c in 0..y.width() {
            out[(2 * r, 2 * c)] = y[(r, c)];
        }
    }
    out
}

/// Blur then keep every other sample (floor halving).
pub fn reduce(x: &Plane) -> Plane {
    decimate(&blur(x))
}

pub fn reduce_adjoint(y: &Plane, height: usize, width: usize) -> Plane {
    blur_adjoint(&zero_insert(y, height, width))
}

/// Per-pixel weight the blur gives to inserted samples; 1/4 away from the
/// borders.
fn expand_weight(height: usize, width: usize) -> Plane {
    let ones = Plane::filled(height / 2, width / 2, 1.0);
    blur(&zero_insert(&ones, height, width))
}

/// Zero-insertion to `height × width` followed by the binomial blur,
/// renormalized by the weight of the inserted samples so constants survive at
/// the borders (gain 4 in the interior).
pub fn expand(y: &Plane, height: usize, width: usize) -> Plane {
    let weight = expand_weight(height, width);
    blur(&zero_insert(y, height, width))
        .zip_map(&weight, |v, n| v / n)
        .expect("same dims")
}

/// Adjoint of [`expand`] towards a `height × width` plane.
pub fn expand_adjoint(x: &Plane) -> Plane {
    let weight = expand_weight(x.height(), x.width());
    decimate(&blur_adjoint(&x.zip_map(&weight, |v, n| v / n).expect("same dims")))
}

/// Number of levels an image supports: every level keeps both sides >= 1.
pub fn max_levels(height: usize, width: usize) -> usize {
    let side = height.min(width);
    (usize::BITS - side.leading_zeros()) as usize
}

/// Band-pass decomposition. `bands[0]` is the finest detail band and the last
/// entry is the coarse residual.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianPyramid {
    pub bands: Vec<Plane>,
    /// Set when the image was too small for the requested depth.
    pub truncated_from: Option<usize>,
}

impl LaplacianPyramid {
    pub fn levels(&self) -> usize {
        self.bands.len()
    }

    /// Collapses the bands back into an image.
    pub fn reconstruct(&self) -> Plane {
        let mut iter = self.bands.iter().rev();
        let mut acc = iter.next().expect("at least one band").clone();
        for band in iter {
            let up = expand(&acc, band.height(), band.width());
            acc = band.zip_map(&up, |a, b| a + b).expect("same dims");
        }
        acc
    }
}

/// Effective depth for an image, clamped to what its size allows.
pub fn effective_levels(dims: (usize, usize), levels: usize) -> Result<usize> {
    if levels == 0 {
        return Err(Error::invalid("pyramid needs at least one level"));
    }
    let max = max_levels(dims.0, dims.1);
    if levels > max {
        warn!(
            "{}x{} image supports only {max} pyramid levels, {levels} requested",
            dims.0, dims.1
        );
        return Ok(max);
    }
    Ok(levels)
}

/// Gaussian levels `G_1 = img, G_{s+1} = reduce(G_s)`.
fn gaussian_levels(img: &Plane, levels: usize) -> Vec<Plane> {
    let mut g = vec![img.clone()];
    for _ in 1..levels {
        let next = reduce(g.last().unwrap());
        g.push(next);
    }
    g
}

pub fn laplacian_pyramid(img: &Plane, levels: usize) -> Result<LaplacianPyramid> {
    let used = effective_levels(img.dims(), levels)?;
    let g = gaussian_levels(img, used);
    let mut bands = Vec::with_capacity(used);
    for s in 0..used - 1 {
        let up = expand(&g[s + 1], g[s].height(), g[s].width());
        bands.push(g[s].zip_map(&up, |a, b| a - b)?);
    }
    bands.push(g[used - 1].clone());
    Ok(LaplacianPyramid {
        bands,
        truncated_from: (used < levels).then_some(levels),
    })
}

/// Level dimensions for an image of `dims` over `levels` levels.
pub(crate) fn level_dims(dims: (usize, usize), levels: usize) -> Vec<(usize, usize)> {
    (0..levels).map(|s| (dims.0 >> s, dims.1 >> s)).collect()
}

/// Expands a band at level `s` (0-based) up to level 0 resolution.
pub(crate) fn upsample_to_full(band: &Plane, s: usize, dims: &[(usize, usize)]) -> Plane {
    let mut acc = band.clone();
    for k in (0..s).rev() {
        acc = expand(&acc, dims[k].0, dims[k].1);
    }
    acc
}

/// Adjoint of [`upsample_to_full`].
pub(crate) fn upsample_to_full_adjoint(full: &Plane, s: usize) -> Plane {
    let mut acc = full.clone();
    for _ in 0..s {
        acc = expand_adjoint(&acc);
    }
    acc
}

/// Given per-band cotangents `v[s]` (each at its band's resolution), returns
/// the cotangent with respect to the input image.
pub(crate) fn pyramid_adjoint(v: &[Plane], dims: &[(usize, usize)]) -> Plane {
    let levels = v.len();
    // Cotangent accumulated on each Gaussian level.
    let mut g: Vec<Plane> = v.to_vec();
    for s in 0..levels - 1 {
        // band_s = G_s - expand(G_{s+1})
        let back = expand_adjoint(&v[s]);
        g[s + 1] = g[s + 1].zip_map(&back, |a, b| a - b).expect("same dims");
    }
    for s in (1..levels).rev() {
        let (h, w) = dims[s - 1];
        let pulled = reduce_adjoint(&g[s], h, w);
        g[s - 1] = g[s - 1].zip_map(&pulled, |a, b| a + b).expect("same dims");
    }
    g.swap_remove(0)
}
