//! Portable float map codec.
//!
//! Layout: ASCII header `Pf` (1 channel) or `PF` (3 channels), then
//! `<width> <height>`, then a scale whose sign gives the byte order (negative
//! means little-endian), each followed by a single whitespace byte, then raw
//! 32-bit floats with rows stored bottom to top. Files written here always use
//! `-1.0`, i.e. little-endian.

use crate::error::{Error, Result};

/// Refuse to allocate beyond this many samples.
const MAX_SAMPLES: usize = 1 << 30;

#[derive(Clone, Debug, PartialEq)]
pub struct PfmImage {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Top-to-bottom, row-major, channel-interleaved.
    pub data: Vec<f32>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn token(&mut self, what: &str) -> Result<&'a str> {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::CorruptHeader(format!("missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| Error::CorruptHeader(format!("non-ASCII {what}")))
    }

    /// Consumes the single whitespace byte that terminates the header.
    fn end_of_header(&mut self) -> Result<()> {
        match self.bytes.get(self.pos) {
            Some(b) if b.is_ascii_whitespace() => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(Error::CorruptHeader("header not terminated by whitespace".into())),
        }
    }
}

pub fn decode(bytes: &[u8]) -> Result<PfmImage> {
    if bytes.len() < 2 {
        return Err(Error::CorruptHeader("file too short".into()));
    }
    let channels = match &bytes[..2] {
        b"Pf" => 1,
        b"PF" => 3,
        other => {
            return Err(Error::CorruptHeader(format!(
                "bad magic {:?}",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let parse_dim = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::CorruptHeader(format!("bad {what} `{s}`")))
    };
    let width = parse_dim(cur.token("width")?, "width")?;
    let height = parse_dim(cur.token("height")?, "height")?;
    let scale_tok = cur.token("scale")?;
    let scale: f64 = scale_tok
        .parse()
        .map_err(|_| Error::CorruptHeader(format!("bad scale `{scale_tok}`")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::CorruptHeader(format!("scale must be nonzero, got {scale}")));
    }
    cur.end_of_header()?;
    if width == 0 || height == 0 {
        return Err(Error::CorruptHeader(format!("empty image {width}x{height}")));
    }
    let samples = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|&n| n <= MAX_SAMPLES)
        .ok_or(Error::DimensionOverflow(height, width))?;
    let body = &bytes[cur.pos..];
    if body.len() != samples * 4 {
        return Err(Error::CorruptHeader(format!(
            "expected {} data bytes, found {}",
            samples * 4,
            body.len()
        )));
    }
    let little = scale < 0.0;
    let row_len = width * channels;
    let mut data = vec![0f32; samples];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (i / row_len, i % row_len);
        data[(height - 1 - file_row) * row_len + col] = v;
    }
    Ok(PfmImage {
        width,
        height,
        channels,
        data,
    })
}

pub fn encode(img: &PfmImage) -> Vec<u8> {
    let magic = if img.channels == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    let row_len = img.width * img.channels;
    out.reserve(img.data.len() * 4);
    for row in (0..img.height).rev() {
        for &v in &img.data[row * row_len..(row + 1) * row_len] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}
