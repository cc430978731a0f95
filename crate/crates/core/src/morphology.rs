//! Binary dilation and erosion with a square structuring element.
//!
//! Pixels outside the image count as background, so erosion eats in from the
//! image border.

use crate::error::{Error, Result};
use crate::image::BinaryMap;

/// 1-D running max (`want = true`) or min (`want = false`) over `[i - r, i + r]`,
/// treating out-of-range samples as 0.
fn sweep(line: &[u8], radius: usize, want: bool) -> Vec<u8> {
    let n = line.len();
    // prefix count of ones for O(1) window queries
    let mut prefix = vec![0usize; n + 1];
    for (i, &v) in line.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v as usize;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(n);
            let ones = prefix[hi] - prefix[lo];
            let hit = if want {
                ones > 0
            } else {
                // every window position in-bounds and set
                i >= radius && i + radius < n && ones == 2 * radius + 1
            };
            u8::from(hit)
        })
        .collect()
}

fn separable<K>(mask: &BinaryMap<K>, radius: usize, want: bool) -> BinaryMap<K> {
    let (h, w) = (mask.height(), mask.width());
    let src = mask.as_slice();
    let mut tmp = Vec::with_capacity(h * w);
    for r in 0..h {
        tmp.extend(sweep(&src[r * w..(r + 1) * w], radius, want));
    }
    let mut out = vec![0u8; h * w];
    let mut col = vec![0u8; h];
    for c in 0..w {
        for r in 0..h {
            col[r] = tmp[r * w + c];
        }
        for (r, v) in sweep(&col, radius, want).into_iter().enumerate() {
            out[r * w + c] = v;
        }
    }
    BinaryMap::new(h, w, out).expect("shape preserved")
}

/// Dilation by a `(2·radius+1)²` square.
pub fn dilate<K>(mask: &BinaryMap<K>, radius: usize) -> BinaryMap<K> {
    separable(mask, radius, true)
}

/// Erosion by a `(2·radius+1)²` square; out-of-image pixels are background.
pub fn erode<K>(mask: &BinaryMap<K>, radius: usize) -> BinaryMap<K> {
    separable(mask, radius, false)
}

/// `dilate(mask, width) XOR erode(mask, width)`.
pub fn boundary_band<K, J>(mask: &BinaryMap<K>, width: usize) -> Result<BinaryMap<J>> {
    if width < 1 {
        return Err(Error::invalid("band width must be at least 1"));
    }
    let d = dilate(mask, width);
    let e = erode(mask, width);
    Ok(d.zip_with(&e, |a, b| a != b)?.cast())
}
