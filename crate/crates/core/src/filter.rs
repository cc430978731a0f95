//! Separable linear filtering with reflect padding.
//!
//! Reflection is the half-sample symmetric kind (`d c b a | a b c d | d c b a`),
//! which is well defined for any length >= 1.

use crate::error::{Error, Result};
use crate::image::Plane;

/// Maps a possibly out-of-range index onto `[0, n)` by mirroring.
pub fn reflect_index(i: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Filter along each row (horizontal direction).
    Rows,
    /// Filter along each column (vertical direction).
    Cols,
}

/// A 1-D kernel centred on index `taps.len() / 2`. Length must be odd.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel1d {
    taps: Vec<f64>,
}

impl Kernel1d {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.len().is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel length must be odd, got {}",
                taps.len()
            )));
        }
        Ok(Kernel1d { taps })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn radius(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn sum(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Sampled Gaussian of the given length, normalized to unit sum.
    pub fn gaussian(len: usize, sigma: f64) -> Result<Self> {
        if len == 0 || len.is_multiple_of(2) {
            return Err(Error::invalid(format!("kernel size must be odd and >= 1, got {len}")));
        }
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        let r = (len / 2) as isize;
        let raw: Vec<f64> = (-r..=r).map(|x| gauss(x as f64, sigma)).collect();
        let s: f64 = raw.iter().sum();
        Ok(Kernel1d {
            taps: raw.into_iter().map(|v| v / s).collect(),
        })
    }

    /// Unit-sum Gaussian truncated at radius `ceil(3 sigma)`.
    pub fn gaussian_truncated(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
        }
        let r = (3.0 * sigma).ceil() as usize;
        Self::gaussian(2 * r + 1, sigma)
    }

    /// First derivative of the unit-sum truncated Gaussian, `-x / sigma^2 * g(x)`.
    /// Convolving a unit ramp with it gives a slope close to 1.
    pub fn gaussian_derivative(sigma: f64) -> Result<Self> {
        let g = Self::gaussian_truncated(sigma)?;
        let r = g.radius() as isize;
        let taps = g
            .taps
            .iter()
            .zip(-r..=r)
            .map(|(&w, x)| -(x as f64) / (sigma * sigma) * w)
            .collect();
        Ok(Kernel1d { taps })
    }
}

fn gauss(x: f64, sigma: f64) -> f64 {
    (-(x * x) / (2.0 * sigma * sigma)).exp()
}

/// True convolution along one axis: `out[i] = sum_k h[k] * in[reflect(i - (k - r))]`.
pub fn convolve_axis(src: &Plane, kernel: &Kernel1d, axis: Axis) -> Plane {
    let (h, w) = (src.height(), src.width());
    let r = kernel.radius() as isize;
    let taps = kernel.taps();
    let mut out = Plane::zeros(h, w);
    match axis {
        Axis::Rows => {
            for row in 0..h {
                for col in 0..w {
                    let mut acc = 0.0;
                    for (k, &t) in taps.iter().enumerate() {
                        let j = reflect_index(col as isize - (k as isize - r), w);
                        acc += t * src[(row, j)];
                    }
                    out[(row, col)] = acc;
                }
            }
        }
        Axis::Cols => {
            for row in 0..h {
                for col in 0..w {
                    let mut acc = 0.0;
                    for (k, &t) in taps.iter().enumerate() {
                        let i = reflect_index(row as isize - (k as isize - r), h);
                        acc += t * src[(i, col)];
                    }
                    out[(row, col)] = acc;
                }
            }
        }
    }
    out
}

/// Adjoint (transpose) of [`convolve_axis`] for the same kernel and axis.
pub fn convolve_axis_adjoint(src: &Plane, kernel: &Kernel1d, axis: Axis) -> Plane {
    let (h, w) = (src.height(), src.width());
    let r = kernel.radius() as isize;
    let taps = kernel.taps();
    let mut out = Plane::zeros(h, w);
    for row in 0..h {
        for col in 0..w {
            let v = src[(row, col)];
            for (k, &t) in taps.iter().enumerate() {
                match axis {
                    Axis::Rows => {
                        let j = reflect_index(col as isize - (k as isize - r), w);
                        out[(row, j)] += t * v;
                    }
                    Axis::Cols => {
                        let i = reflect_index(row as isize - (k as isize - r), h);
                        out[(i, col)] += t * v;
                    }
                }
            }
        }
    }
    out
}

/// Applies `row_kernel` horizontally then `col_kernel` vertically.
pub fn convolve_separable(src: &Plane, row_kernel: &Kernel1d, col_kernel: &Kernel1d) -> Plane {
    let tmp = convolve_axis(src, row_kernel, Axis::Rows);
    convolve_axis(&tmp, col_kernel, Axis::Cols)
}

/// Weighted average along one axis: the kernel is applied unnormalized and
/// each output is divided by the sum of taps. A window of identical values
/// reproduces that value exactly, which keeps blurred binary masks at exactly
/// 0 and 1 away from transitions.
pub fn average_axis(src: &Plane, kernel: &Kernel1d, axis: Axis) -> Plane {
    let total = kernel.sum();
    let mut out = convolve_axis(src, kernel, axis);
    for v in out.as_mut_slice() {
        *v /= total;
    }
    out
}
