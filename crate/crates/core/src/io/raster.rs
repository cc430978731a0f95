//! Loading and saving the raster types.
//!
//! Continuous maps (mattes, probability maps) round-trip exactly through PFM.
//! PNG/PGM rasters hold 8- or 16-bit quantized mattes and `{0, 255}` binary
//! maps.

use std::fs;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use super::pfm::{self, PfmImage};
use crate::error::{Error, Result};
use crate::image::{AlphaMatte, BinaryMap, BitDepth, Plane, ProbMap, RgbFrame};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Pfm,
    Raster,
}

fn format_of(path: &Path) -> Result<Format> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "pfm" => Ok(Format::Pfm),
        "png" | "pgm" | "ppm" | "pnm" => Ok(Format::Raster),
        _ => Err(Error::UnsupportedFormat(format!("{} (extension `{ext}`)", path.display()))),
    }
}

fn read_pfm(path: &Path) -> Result<PfmImage> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    pfm::decode(&bytes)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn open_raster(path: &Path) -> Result<DynamicImage> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn encode_err(path: &Path, e: image::ImageError) -> Error {
    Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn gray_plane(path: &Path) -> Result<Plane> {
    match format_of(path)? {
        Format::Pfm => {
            let img = read_pfm(path)?;
            if img.channels != 1 {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: expected a 1-channel PFM",
                    path.display()
                )));
            }
            Plane::new(img.height, img.width, img.data.iter().map(|&v| v as f64).collect())
        }
        Format::Raster => {
            let (raw, w, h, depth) = gray_samples(path)?;
            let max = depth.max_value() as f64;
            Plane::new(h, w, raw.iter().map(|&v| v as f64 / max).collect())
        }
    }
}

fn gray_samples(path: &Path) -> Result<(Vec<u32>, usize, usize, BitDepth)> {
    match open_raster(path)? {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Ok((buf.into_raw().into_iter().map(u32::from).collect(), w as usize, h as usize, BitDepth::Eight))
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Ok((buf.into_raw().into_iter().map(u32::from).collect(), w as usize, h as usize, BitDepth::Sixteen))
        }
        other => Err(Error::UnsupportedFormat(format!(
            "{}: expected 8- or 16-bit grayscale, found {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Loads a matte from PFM (exact) or an 8/16-bit grayscale raster.
pub fn load_alpha(path: &Path) -> Result<AlphaMatte> {
    if format_of(path)? == Format::Raster {
        let (raw, w, h, depth) = gray_samples(path)?;
        return AlphaMatte::from_quantized(h, w, &raw, depth);
    }
    AlphaMatte::new(gray_plane(path)?)
}

pub fn load_prob(path: &Path) -> Result<ProbMap> {
    ProbMap::new(gray_plane(path)?)
}

fn save_unit_plane(path: &Path, plane: &Plane) -> Result<()> {
    match format_of(path)? {
        Format::Pfm => {
            let img = PfmImage {
                width: plane.width(),
                height: plane.height(),
                channels: 1,
                data: plane.as_slice().iter().map(|&v| v as f32).collect(),
            };
            write_bytes(path, &pfm::encode(&img))
        }
        Format::Raster => {
            let data: Vec<u16> = plane
                .as_slice()
                .iter()
                .map(|&v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
                .collect();
            let buf: ImageBuffer<Luma<u16>, _> =
                ImageBuffer::from_raw(plane.width() as u32, plane.height() as u32, data).expect("sized");
            buf.save(path).map_err(|e| encode_err(path, e))
        }
    }
}

/// Saves as 32-bit PFM or 16-bit raster depending on the extension.
pub fn save_alpha(path: &Path, alpha: &AlphaMatte) -> Result<()> {
    save_unit_plane(path, alpha.plane())
}

pub fn save_prob(path: &Path, p: &ProbMap) -> Result<()> {
    save_unit_plane(path, p.plane())
}

/// Unclamped scalar map (e.g. a soft mask) as PFM.
pub fn save_plane_pfm(path: &Path, plane: &Plane) -> Result<()> {
    let img = PfmImage {
        width: plane.width(),
        height: plane.height(),
        channels: 1,
        data: plane.as_slice().iter().map(|&v| v as f32).collect(),
    };
    write_bytes(path, &pfm::encode(&img))
}

/// Loads a binary map stored as an 8-bit raster with values `{0, 255}` or a
/// PFM with values `{0, 1}`. Anything else is rejected.
pub fn load_binary<K>(path: &Path) -> Result<BinaryMap<K>> {
    match format_of(path)? {
        Format::Raster => {
            let (raw, w, h, depth) = gray_samples(path)?;
            if depth != BitDepth::Eight {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: binary maps must be 8-bit",
                    path.display()
                )));
            }
            let max = depth.max_value();
            if let Some((index, &v)) = raw.iter().enumerate().find(|(_, &v)| v != 0 && v != max) {
                return Err(Error::RangeViolation {
                    index,
                    value: v as f64,
                });
            }
            BinaryMap::from_bools(h, w, raw.iter().map(|&v| v == max))
        }
        Format::Pfm => {
            let plane = gray_plane(path)?;
            if let Some((index, &v)) = plane
                .as_slice()
                .iter()
                .enumerate()
                .find(|(_, &v)| v != 0.0 && v != 1.0)
            {
                return Err(Error::RangeViolation { index, value: v });
            }
            BinaryMap::from_bools(plane.height(), plane.width(), plane.as_slice().iter().map(|&v| v == 1.0))
        }
    }
}

/// Writes `{0, 255}` 8-bit PNG/PGM (or `{0, 1}` PFM).
pub fn save_binary<K>(path: &Path, map: &BinaryMap<K>) -> Result<()> {
    match format_of(path)? {
        Format::Pfm => save_plane_pfm(path, &map.to_plane()),
        Format::Raster => {
            let data: Vec<u8> = map.as_slice().iter().map(|&v| v * 255).collect();
            let buf: ImageBuffer<Luma<u8>, _> =
                ImageBuffer::from_raw(map.width() as u32, map.height() as u32, data).expect("sized");
            buf.save(path).map_err(|e| encode_err(path, e))
        }
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbFrame> {
    match format_of(path)? {
        Format::Pfm => {
            let img = read_pfm(path)?;
            if img.channels != 3 {
                return Err(Error::UnsupportedFormat(format!(
                    "{}: expected a 3-channel PFM",
                    path.display()
                )));
            }
            let data = img
                .data
                .chunks_exact(3)
                .map(|c| [c[0] as f64, c[1] as f64, c[2] as f64])
                .collect();
            RgbFrame::new(img.height, img.width, data)
        }
        Format::Raster => {
            let img = open_raster(path)?;
            let (w, h) = (img.width() as usize, img.height() as usize);
            let data = match img {
                DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) | DynamicImage::ImageLuma16(_) => img
                    .to_rgb16()
                    .pixels()
                    .map(|p| p.0.map(|v| v as f64 / 65535.0))
                    .collect(),
                _ => img
                    .to_rgb8()
                    .pixels()
                    .map(|p| p.0.map(|v| v as f64 / 255.0))
                    .collect(),
            };
            RgbFrame::new(h, w, data)
        }
    }
}

/// Saves a frame as 16-bit RGB raster or 3-channel PFM.
pub fn save_rgb(path: &Path, frame: &RgbFrame) -> Result<()> {
    match format_of(path)? {
        Format::Pfm => {
            let img = PfmImage {
                width: frame.width(),
                height: frame.height(),
                channels: 3,
                data: frame.as_slice().iter().flat_map(|p| p.map(|v| v as f32)).collect(),
            };
            write_bytes(path, &pfm::encode(&img))
        }
        Format::Raster => {
            let data: Vec<u16> = frame
                .as_slice()
                .iter()
                .flat_map(|p| p.map(|v| (v * 65535.0).round() as u16))
                .collect();
            let buf: ImageBuffer<Rgb<u16>, _> =
                ImageBuffer::from_raw(frame.width() as u32, frame.height() as u32, data).expect("sized");
            buf.save(path).map_err(|e| encode_err(path, e))
        }
    }
}

/// Writes an 8-bit grayscale raster of a matte (for building fixtures).
pub fn save_alpha_8bit(path: &Path, alpha: &AlphaMatte) -> Result<()> {
    let data: Vec<u8> = alpha.quantize(BitDepth::Eight).into_iter().map(|v| v as u8).collect();
    let buf: ImageBuffer<Luma<u8>, _> =
        ImageBuffer::from_raw(alpha.width() as u32, alpha.height() as u32, data).expect("sized");
    buf.save(path).map_err(|e| encode_err(path, e))
}
