//! RGB float images and binary masks.

use serde::{Deserialize, Serialize};

use crate::Error;

/// Row-major interleaved RGB buffer with `f32` channels.
///
/// The same buffer type holds linear HDR renders (channels ≥ 0, unbounded)
/// and tone-mapped display images (channels in `[0, 1)`); the aliases
/// [`LinearImage`] and [`DisplayImage`] document which one a function
/// expects.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

/// HDR linear-RGB radiance.
pub type LinearImage = Image;
/// Tone-mapped image in `[0, 1)`.
pub type DisplayImage = Image;

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            data: vec![0.0; width * height * 3],
        }
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut img = Image::new(width, height);
        for px in img.data.chunks_exact_mut(3) {
            px.copy_from_slice(&rgb);
        }
        img
    }

    pub fn from_raw(width: usize, height: usize, data: Vec<f32>) -> Result<Self, Error> {
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or(Error::DimensionOverflow { width, height })?;
        if data.len() != expected {
            return Err(Error::Invalid(format!(
                "image buffer has {} values, expected {expected} for {width}x{height} RGB",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<f32> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [f32; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Channelwise sum. Errors when dimensions differ.
    pub fn add(&self, other: &Image) -> Result<Image, Error> {
        self.check_same_dims(other)?;
        Ok(Image {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scaled(&self, s: f32) -> Image {
        self.map(|v| v * s)
    }

    pub fn check_same_dims(&self, other: &Image) -> Result<(), Error> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    /// True when every channel is finite and non-negative.
    pub fn is_valid_radiance(&self) -> bool {
        self.data.iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Pixel values as `f64`, flattened in storage order.
    pub fn to_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }

    pub fn from_f64(width: usize, height: usize, values: &[f64]) -> Result<Image, Error> {
        Image::from_raw(width, height, values.iter().map(|&v| v as f32).collect())
    }
}

/// Binary per-pixel mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    /// One entry per pixel, `true` where the mask is set.
    #[serde(with = "bits")]
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn union(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| *a || *b)
                .collect(),
        }
    }

    /// Average-pools the mask onto a `cells × cells` grid. Each output value
    /// is the fraction of set pixels whose centre falls in that cell.
    pub fn pooled(&self, cells: usize) -> Vec<f64> {
        let mut sums = vec![0.0; cells * cells];
        let mut counts = vec![0usize; cells * cells];
        for y in 0..self.height {
            let cy = y * cells / self.height.max(1);
            for x in 0..self.width {
                let cx = x * cells / self.width.max(1);
                let c = cy * cells + cx;
                counts[c] += 1;
                if self.get(x, y) {
                    sums[c] += 1.0;
                }
            }
        }
        sums.iter()
            .zip(&counts)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { 0.0 })
            .collect()
    }
}

/// Masks serialize as a compact `"0101…"` string.
mod bits {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(bits: &[bool], s: S) -> Result<S::Ok, S::Error> {
        let text: String = bits.iter().map(|b| if *b { '1' } else { '0' }).collect();
        s.serialize_str(&text)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<bool>, D::Error> {
        let text = String::deserialize(d)?;
        text.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(serde::de::Error::custom(format!(
                    "mask bit must be '0' or '1', got {other:?}"
                ))),
            })
            .collect()
    }
}
