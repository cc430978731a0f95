//! In-memory raster types.
//!
//! Everything is row-major `f64` (or `u8` for binary maps). Quantized encodings
//! only exist at the I/O boundary; see [`AlphaMatte::from_quantized`].

use std::marker::PhantomData;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Anything with a height and a width.
pub trait Dims {
    /// `(height, width)`
    fn dims(&self) -> (usize, usize);

    fn pixel_count(&self) -> usize {
        let (h, w) = self.dims();
        h * w
    }
}

pub fn ensure_same_dims(a: &impl Dims, b: &impl Dims) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            found: b.dims(),
        });
    }
    Ok(())
}

fn check_shape(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::invalid(format!(
            "image sides must be at least 1, got {height}x{width}"
        )));
    }
    match height.checked_mul(width) {
        Some(n) if n == len => Ok(()),
        Some(n) => Err(Error::invalid(format!(
            "{height}x{width} image needs {n} samples, got {len}"
        ))),
        None => Err(Error::DimensionOverflow(height, width)),
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.top
            && row < self.top + self.height
            && col >= self.left
            && col < self.left + self.width
    }
}

/// Unconstrained scalar map. Used for intermediate results such as gradient
/// magnitudes, pyramid bands and loss gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(height, width, data.len())?;
        Ok(Plane {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        assert!(height > 0 && width > 0, "image sides must be at least 1");
        Plane {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(height > 0 && width > 0, "image sides must be at least 1");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Plane {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn crop(&self, rect: Rect) -> Plane {
        assert!(rect.top + rect.height <= self.height && rect.left + rect.width <= self.width);
        Plane::from_fn(rect.height, rect.width, |r, c| {
            self[(rect.top + r, rect.left + c)]
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Result<Plane> {
        ensure_same_dims(self, other)?;
        Ok(Plane {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }
}

impl Dims for Plane {
    fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

impl Index<(usize, usize)> for Plane {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.width + c]
    }
}

impl IndexMut<(usize, usize)> for Plane {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.width + c]
    }
}

/// Marker for opacity values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Opacity;

/// Marker for per-pixel error probabilities (class 0).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ErrorProbability;

/// A scalar map whose values all lie in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitMap<K> {
    plane: Plane,
    _kind: PhantomData<K>,
}

/// Per-pixel opacity in `[0, 1]`.
pub type AlphaMatte = UnitMap<Opacity>;
/// Per-pixel probability that the matte is wrong at that pixel.
pub type ProbMap = UnitMap<ErrorProbability>;

/// Returns the first index whose value is outside `[0, 1]` (NaN included).
fn first_out_of_unit(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .find(|&(_, v)| !(0.0..=1.0).contains(&v))
}

impl<K> UnitMap<K> {
    pub fn new(plane: Plane) -> Result<Self> {
        if let Some((index, value)) = first_out_of_unit(plane.as_slice()) {
            return Err(Error::RangeViolation { index, value });
        }
        Ok(UnitMap {
            plane,
            _kind: PhantomData,
        })
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Plane::new(height, width, data)?)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Plane::filled(height, width, value))
    }

    /// Clamps every value into `[0, 1]`; NaN becomes 0.
    pub fn from_plane_clamped(plane: Plane) -> Self {
        let plane = plane.map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
        UnitMap {
            plane,
            _kind: PhantomData,
        }
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn into_plane(self) -> Plane {
        self.plane
    }

    pub fn as_slice(&self) -> &[f64] {
        self.plane.as_slice()
    }

    pub fn height(&self) -> usize {
        self.plane.height()
    }

    pub fn width(&self) -> usize {
        self.plane.width()
    }

    /// Reinterprets the values under a different marker.
    pub fn cast<J>(self) -> UnitMap<J> {
        UnitMap {
            plane: self.plane,
            _kind: PhantomData,
        }
    }
}

impl<K> Dims for UnitMap<K> {
    fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }
}

impl<K> Index<(usize, usize)> for UnitMap<K> {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.plane[idx]
    }
}

/// Supported quantized sample depths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn from_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(BitDepth::Eight),
            16 => Ok(BitDepth::Sixteen),
            other => Err(Error::invalid(format!("bit depth must be 8 or 16, got {other}"))),
        }
    }

    pub fn max_value(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

impl AlphaMatte {
    /// Maps integer samples to `raw / (2^depth - 1)`.
    pub fn from_quantized(height: usize, width: usize, raw: &[u32], depth: BitDepth) -> Result<Self> {
        check_shape(height, width, raw.len())?;
        let max = depth.max_value();
        if let Some((index, &v)) = raw.iter().enumerate().find(|(_, &v)| v > max) {
            return Err(Error::RangeViolation {
                index,
                value: v as f64,
            });
        }
        let scale = max as f64;
        let data = raw.iter().map(|&v| v as f64 / scale).collect();
        Ok(UnitMap {
            plane: Plane {
                height,
                width,
                data,
            },
            _kind: PhantomData,
        })
    }

    /// Rounds to the nearest integer sample.
    pub fn quantize(&self, depth: BitDepth) -> Vec<u32> {
        let max = depth.max_value() as f64;
        self.as_slice()
            .iter()
            .map(|&v| (v * max).round() as u32)
            .collect()
    }
}

/// Marker for segmentation masks (1 = foreground).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segmentation;

/// Marker for evaluation maps (1 = reliable, 0 = erroneous).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reliability;

/// Marker for generic binary maps (bands, fusion masks).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Generic;

/// A map whose values are exactly 0 or 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMap<K> {
    height: usize,
    width: usize,
    data: Vec<u8>,
    _kind: PhantomData<K>,
}

pub type SegMask = BinaryMap<Segmentation>;
pub type EvalMap = BinaryMap<Reliability>;
pub type Mask = BinaryMap<Generic>;

impl<K> BinaryMap<K> {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(height, width, data.len())?;
        if let Some((index, &v)) = data.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(Error::RangeViolation {
                index,
                value: v as f64,
            });
        }
        Ok(BinaryMap {
            height,
            width,
            data,
            _kind: PhantomData,
        })
    }

    pub fn from_bools(height: usize, width: usize, bits: impl IntoIterator<Item = bool>) -> Result<Self> {
        Self::new(height, width, bits.into_iter().map(u8::from).collect())
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        assert!(height > 0 && width > 0, "image sides must be at least 1");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(u8::from(f(r, c)));
            }
        }
        BinaryMap {
            height,
            width,
            data,
            _kind: PhantomData,
        }
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Self {
        Self::from_fn(height, width, |_, _| value)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col] == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.width + col] = u8::from(value);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn cast<J>(self) -> BinaryMap<J> {
        BinaryMap {
            height: self.height,
            width: self.width,
            data: self.data,
            _kind: PhantomData,
        }
    }

    /// 0.0 / 1.0 scalar view.
    pub fn to_plane(&self) -> Plane {
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn zip_with<J>(&self, other: &BinaryMap<J>, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        ensure_same_dims(self, other)?;
        Ok(BinaryMap {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| u8::from(f(a == 1, b == 1)))
                .collect(),
            _kind: PhantomData,
        })
    }
}

impl<K> Dims for BinaryMap<K> {
    fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

impl SegMask {
    /// A segmentation mask used in place of an alpha (hard 0/1 opacity).
    pub fn to_alpha(&self) -> AlphaMatte {
        AlphaMatte::from_plane_clamped(self.to_plane())
    }
}

/// Thresholds an error-probability map: a pixel is reliable iff `p < threshold`.
pub fn binarize_prob(p: &ProbMap, threshold: f64) -> Result<EvalMap> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    EvalMap::from_bools(
        p.height(),
        p.width(),
        p.as_slice().iter().map(|&v| v < threshold),
    )
}

/// How the second operand of [`validate_pair`] is constrained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueKind {
    /// Values in `[0, 1]` (mattes, probability maps).
    Unit,
    /// Values exactly 0 or 1 (segmentation and evaluation maps).
    Binary,
}

/// Checks that `a` is a valid matte and `b` has the same shape and satisfies
/// its own value constraint. Range errors report the first offending index.
pub fn validate_pair(a: &Plane, b: &Plane, b_kind: ValueKind) -> Result<()> {
    ensure_same_dims(a, b)?;
    if let Some((index, value)) = first_out_of_unit(a.as_slice()) {
        return Err(Error::RangeViolation { index, value });
    }
    let offending = match b_kind {
        ValueKind::Unit => first_out_of_unit(b.as_slice()),
        ValueKind::Binary => b
            .as_slice()
            .iter()
            .copied()
            .enumerate()
            .find(|&(_, v)| v != 0.0 && v != 1.0),
    };
    match offending {
        Some((index, value)) => Err(Error::RangeViolation { index, value }),
        None => Ok(()),
    }
}

/// Three-channel frame with channel values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbFrame {
    height: usize,
    width: usize,
    data: Vec<[f64; 3]>,
}

impl RgbFrame {
    pub fn new(height: usize, width: usize, data: Vec<[f64; 3]>) -> Result<Self> {
        check_shape(height, width, data.len())?;
        if let Some((i, px)) = data
            .iter()
            .enumerate()
            .find(|(_, px)| px.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            let value = px.iter().copied().find(|v| !(0.0..=1.0).contains(v)).unwrap();
            return Err(Error::RangeViolation {
                index: i * 3,
                value,
            });
        }
        Ok(RgbFrame {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        Self::new(height, width, vec![rgb; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[[f64; 3]] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        self.data[row * self.width + col]
    }

    pub(crate) fn zero_rect(&mut self, rect: Rect) {
        for r in rect.top..rect.top + rect.height {
            let start = r * self.width + rect.left;
            self.data[start..start + rect.width].fill([0.0; 3]);
        }
    }
}

impl Dims for RgbFrame {
    fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

impl AlphaMatte {
    pub(crate) fn zero_rect(&mut self, rect: Rect) {
        for r in rect.top..rect.top + rect.height {
            for c in rect.left..rect.left + rect.width {
                self.plane[(r, c)] = 0.0;
            }
        }
    }
}
