//! Reading and writing 8-bit grayscale rasters (PGM P2/P5 and PNG).

use std::fs;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, Grid, ProbMap, RealGrid};

/// Pixel values at or above this level load as foreground.
pub const FOREGROUND_THRESHOLD: u8 = 128;

/// Decoded 8-bit grayscale raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

fn decode_err(field: &'static str, message: impl Into<String>) -> Error {
    Error::Decode {
        field,
        message: message.into(),
    }
}

/// Decodes a PGM (P2 or P5) or grayscale PNG from memory.
pub fn decode_gray(bytes: &[u8]) -> Result<GrayImage> {
    match bytes {
        [b'P', b'2', ..] | [b'P', b'5', ..] => decode_pgm(bytes),
        [0x89, b'P', b'N', b'G', ..] => decode_png(bytes),
        _ => Err(decode_err("magic", "not a PGM (P2/P5) or PNG file")),
    }
}

struct PgmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl PgmHeader<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, field: &'static str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(decode_err(field, "expected a decimal integer"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| decode_err(field, "integer out of range"))
    }
}

fn decode_pgm(bytes: &[u8]) -> Result<GrayImage> {
    let binary = bytes[1] == b'5';
    let mut header = PgmHeader { bytes, pos: 2 };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(decode_err("width", format!("empty raster {width}x{height}")));
    }
    if maxval == 0 || maxval > 255 {
        return Err(decode_err(
            "maxval",
            format!("unsupported bit depth (maxval {maxval}, expected 1..=255)"),
        ));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| decode_err("width", "raster too large"))?;

    let raw: Vec<usize> = if binary {
        // Exactly one whitespace byte separates the header from the raster.
        let start = header.pos + 1;
        let data = bytes
            .get(start..start + count)
            .ok_or_else(|| decode_err("raster", format!("expected {count} bytes of pixel data")))?;
        data.iter().map(|&b| b as usize).collect()
    } else {
        (0..count)
            .map(|_| header.number("raster"))
            .collect::<Result<_>>()?
    };

    let pixels = raw
        .into_iter()
        .map(|v| {
            if v > maxval {
                Err(decode_err("raster", format!("sample {v} exceeds maxval {maxval}")))
            } else if maxval == 255 {
                Ok(v as u8)
            } else {
                Ok(((v * 255 + maxval / 2) / maxval) as u8)
            }
        })
        .collect::<Result<_>>()?;
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

fn decode_png(bytes: &[u8]) -> Result<GrayImage> {
    let png_err = |e: png::DecodingError| decode_err("png", e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(png_err)?;
    let (color, depth) = {
        let info = reader.info();
        (info.color_type, info.bit_depth)
    };
    if color != png::ColorType::Grayscale {
        return Err(decode_err(
            "color_type",
            format!("expected grayscale, found {color:?}"),
        ));
    }
    if depth != png::BitDepth::Eight {
        return Err(decode_err(
            "bit_depth",
            format!("unsupported bit depth {depth:?}, expected 8"),
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| decode_err("png", "image too large"))?;
    let mut buf = vec![0; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let stride = frame.line_size;
    let mut pixels = Vec::with_capacity(width * height);
    for row in buf.chunks(stride).take(height) {
        pixels.extend_from_slice(&row[..width]);
    }
    Ok(GrayImage {
        width,
        height,
        pixels,
    })
}

/// Decodes a mask: values `>= 128` are foreground.
pub fn load_mask(bytes: &[u8]) -> Result<BinaryMask> {
    let img = decode_gray(bytes)?;
    BinaryMask::new(
        img.width,
        img.height,
        img.pixels
            .iter()
            .map(|&v| v >= FOREGROUND_THRESHOLD)
            .collect(),
    )
}

/// Decodes a probability map as `value / 255`.
pub fn load_probmap(bytes: &[u8]) -> Result<ProbMap> {
    let img = decode_gray(bytes)?;
    ProbMap::new(
        img.width,
        img.height,
        img.pixels.iter().map(|&v| f64::from(v) / 255.0).collect(),
    )
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    load_mask(&fs::read(path)?)
}

pub fn read_probmap(path: impl AsRef<Path>) -> Result<ProbMap> {
    load_probmap(&fs::read(path)?)
}

/// Binary PGM (P5) encoding.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn encode_png(img: &GrayImage) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        encoder.set_color(png::ColorType::Grayscale);
        encoder.set_depth(png::BitDepth::Eight);
        let to_io = |e: png::EncodingError| std::io::Error::other(e.to_string());
        let mut writer = encoder.write_header().map_err(to_io)?;
        writer.write_image_data(&img.pixels).map_err(to_io)?;
        writer.finish().map_err(to_io)?;
    }
    Ok(out)
}

/// Writes PNG when the extension is `.png`, binary PGM otherwise.
pub fn write_gray(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let is_png = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    let bytes = if is_png {
        encode_png(img)?
    } else {
        encode_pgm(img)
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn mask_to_gray(mask: &BinaryMask) -> GrayImage {
    GrayImage {
        width: mask.width(),
        height: mask.height(),
        pixels: mask.data().iter().map(|&v| if v { 255 } else { 0 }).collect(),
    }
}

/// Writes a mask with values {0, 255}.
pub fn write_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_gray(&mask_to_gray(mask), path)
}

/// Linearly rescales counts so the maximum maps to 255, rounding half up.
/// An all-zero grid stays all zero.
pub fn heatmap_image(counts: &RealGrid) -> GrayImage {
    let max = counts.max();
    let pixels = counts
        .values()
        .iter()
        .map(|&c| {
            if max <= 0.0 {
                0
            } else {
                (c.max(0.0) * 255.0 / max + 0.5).floor().min(255.0) as u8
            }
        })
        .collect();
    GrayImage {
        width: counts.width(),
        height: counts.height(),
        pixels,
    }
}

pub fn save_heatmap(counts: &RealGrid, path: impl AsRef<Path>) -> Result<()> {
    write_gray(&heatmap_image(counts), path)
}
