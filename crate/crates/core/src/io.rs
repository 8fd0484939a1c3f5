//! PFM and PNG image files.
//!
//! PFM is written as colour (`PF`), little-endian (scale `-1.0`), rows
//! stored bottom-to-top as the format requires. The reader also accepts
//! big-endian files and greyscale (`Pf`) files, which it expands to RGB.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::compositor::tonemap_reinhard;
use crate::image::Image;
use crate::{Error, Result};

pub fn encode_pfm(img: &Image) -> Vec<u8> {
    let (w, h) = img.dims();
    let mut out = format!("PF\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 12);
    for y in (0..h).rev() {
        let row = &img.data()[y * w * 3..(y + 1) * w * 3];
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(path: &Path, img: &Image) -> Result<()> {
    std::fs::write(path, encode_pfm(img))?;
    Ok(())
}

pub fn read_pfm(path: &Path) -> Result<Image> {
    decode_pfm(&std::fs::read(path)?)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Pfm {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_whitespace(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next whitespace-delimited header token.
    fn token(&mut self) -> Result<&str> {
        self.skip_whitespace();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("unexpected end of header");
        }
        match std::str::from_utf8(&self.bytes[start..self.pos]) {
            Ok(s) => Ok(s),
            Err(_) => Err(Error::Pfm {
                offset: start,
                message: "header is not ASCII".into(),
            }),
        }
    }
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match cur.token()? {
        "PF" => 3,
        "Pf" => 1,
        other => {
            let other = other.to_string();
            cur.pos = 0;
            return cur.err(format!("bad magic {other:?}, expected PF or Pf"));
        }
    };
    let width: usize = match cur.token()?.parse() {
        Ok(v) => v,
        Err(_) => return cur.err("width is not an integer"),
    };
    let height: usize = match cur.token()?.parse() {
        Ok(v) => v,
        Err(_) => return cur.err("height is not an integer"),
    };
    let scale: f64 = match cur.token()?.parse() {
        Ok(v) => v,
        Err(_) => return cur.err("scale is not a number"),
    };
    if scale == 0.0 || !scale.is_finite() {
        return cur.err("scale must be non-zero");
    }
    let little_endian = scale < 0.0;
    // Exactly one whitespace byte separates the header from the raster.
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return cur.err("missing newline after scale");
    }
    cur.pos += 1;
    let n = width
        .checked_mul(height)
        .and_then(|p| p.checked_mul(channels))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or(Error::DimensionOverflow { width, height })?;
    let data_start = cur.pos;
    let available = bytes.len() - data_start;
    if available < n * 4 {
        return Err(Error::Pfm {
            offset: bytes.len(),
            message: format!("truncated raster: expected {} bytes from offset {data_start}, found {available}", n * 4),
        });
    }
    let mut data = vec![0f32; width * height * 3];
    for (i, chunk) in bytes[data_start..data_start + n * 4].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let px = i / channels;
        let (file_row, x) = (px / width, px % width);
        let y = height - 1 - file_row;
        let base = (y * width + x) * 3;
        if channels == 3 {
            data[base + i % 3] = v;
        } else {
            data[base..base + 3].fill(v);
        }
    }
    Image::from_raw(width, height, data)
}

/// sRGB opto-electronic transfer for a value in `[0, 1]`.
pub fn srgb_encode(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

/// 8-bit sRGB bytes for a display image (values already in `[0, 1]`).
pub fn display_to_srgb8(img: &Image) -> Vec<u8> {
    img.data()
        .iter()
        .map(|&v| (srgb_encode(v as f64) * 255.0).round() as u8)
        .collect()
}

fn write_png_rgb8(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let file = File::create(path)?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Rgb);
    encoder.set_depth(png::BitDepth::Eight);
    let mut writer = encoder.write_header()?;
    writer.write_image_data(bytes)?;
    writer.finish()?;
    Ok(())
}

/// Reinhard tone map, sRGB encode, 8-bit quantize.
pub fn write_png_tonemapped(path: &Path, img: &Image) -> Result<()> {
    let display = tonemap_reinhard(img);
    write_png_rgb8(path, img.width(), img.height(), &display_to_srgb8(&display))
}

/// sRGB encode and quantize an already tone-mapped image.
pub fn write_png_display(path: &Path, img: &Image) -> Result<()> {
    write_png_rgb8(path, img.width(), img.height(), &display_to_srgb8(img))
}

/// Writes pretty JSON followed by a newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Image {
        let mut img = Image::new(3, 2);
        for (i, v) in img.data_mut().iter_mut().enumerate() {
            *v = i as f32 * 0.37 - 0.5;
        }
        img
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let img = sample();
        let back = decode_pfm(&encode_pfm(&img)).unwrap();
        assert_eq!(back.dims(), img.dims());
        for (a, b) in img.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_layout_and_row_order() {
        let mut img = Image::new(1, 2);
        img.set(0, 0, [1.0, 1.0, 1.0]);
        let bytes = encode_pfm(&img);
        assert!(bytes.starts_with(b"PF\n1 2\n-1.0\n"));
        // Bottom row (zeros) is stored first.
        assert_eq!(&bytes[12..16], &0f32.to_le_bytes());
        assert_eq!(&bytes[24..28], &1f32.to_le_bytes());
    }

    #[test]
    fn big_endian_input_is_byte_swapped() {
        let mut bytes = b"PF\n1 1\n1.0\n".to_vec();
        for v in [0.25f32, 0.5, 2.0] {
            bytes.extend_from_slice(&v.to_be_bytes());
        }
        let img = decode_pfm(&bytes).unwrap();
        assert_eq!(img.get(0, 0), [0.25, 0.5, 2.0]);
    }

    #[test]
    fn greyscale_expands_to_rgb() {
        let mut bytes = b"Pf\n2 1\n-1.0\n".to_vec();
        for v in [0.1f32, 0.9] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let img = decode_pfm(&bytes).unwrap();
        assert_eq!(img.get(1, 0), [0.9, 0.9, 0.9]);
    }

    #[test]
    fn truncated_file_names_the_offset() {
        let bytes = encode_pfm(&sample());
        let cut = &bytes[..bytes.len() - 5];
        match decode_pfm(cut) {
            Err(Error::Pfm { offset, message }) => {
                assert_eq!(offset, cut.len());
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_is_rejected() {
        assert!(matches!(decode_pfm(b"P6\n1 1\n255\n"), Err(Error::Pfm { offset: 0, .. })));
        assert!(matches!(decode_pfm(b"PF\nx 1\n-1.0\n"), Err(Error::Pfm { .. })));
        assert!(matches!(
            decode_pfm(b"PF\n18446744073709551615 2\n-1.0\n"),
            Err(Error::DimensionOverflow { .. })
        ));
    }

    #[test]
    fn srgb_of_half_is_188() {
        // Linear 1.0 tone-maps to 0.5; 1.055·0.5^(1/2.4) − 0.055 = 0.73536.
        let v = srgb_encode(0.5);
        assert!((v - 0.735_357).abs() < 1e-6);
        assert_eq!((v * 255.0).round() as u8, 188);
        let img = Image::filled(1, 1, [1.0, 0.0, 0.0]);
        assert_eq!(display_to_srgb8(&tonemap_reinhard(&img)), vec![188, 0, 0]);
    }
}
