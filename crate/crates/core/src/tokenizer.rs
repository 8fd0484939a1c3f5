//! Lighting-edit tokens.
//!
//! Every scalar attribute, and every component of the vector attributes
//! `p` and `c`, becomes one token
//!
//! ```text
//! γ(v) = [cos(2π·B·v) ‖ sin(2π·B·v)],   B ∈ ℝⁿ, Bₖ ~ N(0, σ²)
//! ```
//!
//! with its own frequency vector `B`. The layout of a token sequence
//! depends only on the edit mode; absent lights in a multi-light edit are
//! encoded from the value `-1`. For classifier-free guidance the whole
//! sequence is replaced by a same-shaped block of `-1` entries.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::image::Mask;
use crate::rng::{keyed_rng, name_key, Purpose};
use crate::scene::{AddLight, EditMode, LightEdit, MAX_MULTI_LIGHTS};
use crate::{Error, Result};

/// Frequencies per attribute (token width is twice this).
pub const DEFAULT_N_FREQ: usize = 32;
/// Standard deviation of the Gaussian frequencies.
pub const DEFAULT_SIGMA: f64 = 5.0;
/// Side of the pooled mask grid; a mask yields `MASK_GRID²` tokens.
pub const MASK_GRID: usize = 4;
/// Value encoded for inactive multi-light blocks.
pub const INACTIVE_SENTINEL: f64 = -1.0;
/// Fill value of a dropped (unconditional) sequence.
pub const DROP_FILL: f64 = -1.0;

/// Attribute names with their own frequency vector.
pub const ATTRIBUTES: [&str; 13] = [
    "a", "d_g", "t", "lambda", "d", "p.x", "p.y", "p.z", "c.r", "c.g", "c.b", "mask", "tau",
];

/// Gaussian Fourier feature map for one attribute.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierEncoder {
    pub frequencies: Vec<f64>,
}

impl FourierEncoder {
    pub fn new(frequencies: Vec<f64>) -> Self {
        FourierEncoder { frequencies }
    }

    pub fn width(&self) -> usize {
        2 * self.frequencies.len()
    }

    /// Writes `[cos(2πBv) ‖ sin(2πBv)]` into `out` (length `width()`).
    pub fn encode_into(&self, v: f64, out: &mut [f64]) {
        let n = self.frequencies.len();
        for (k, b) in self.frequencies.iter().enumerate() {
            let (s, c) = (2.0 * PI * b * v).sin_cos();
            out[k] = c;
            out[n + k] = s;
        }
    }
}

/// Fourier-encodes a finite scalar.
pub fn fourier_encode(v: f64, enc: &FourierEncoder) -> Result<Vec<f64>> {
    if !v.is_finite() {
        return Err(Error::Invalid(format!("cannot encode non-finite value {v}")));
    }
    let mut out = vec![0.0; enc.width()];
    enc.encode_into(v, &mut out);
    Ok(out)
}

/// The full set of per-attribute encoders. Immutable once built; persist
/// it with [`TokenEncoders::to_bytes`] so training and inference share the
/// exact same frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenEncoders {
    n_freq: usize,
    encoders: BTreeMap<String, FourierEncoder>,
}

impl TokenEncoders {
    /// Draws `n_freq` frequencies from `N(0, σ²)` for every attribute, each
    /// from a stream keyed on `(seed, attribute name)`.
    pub fn new(n_freq: usize, sigma: f64, seed: u64) -> Self {
        let normal = Normal::new(0.0, sigma).expect("sigma must be finite and non-negative");
        let encoders = ATTRIBUTES
            .iter()
            .map(|&name| {
                let mut rng = keyed_rng(seed, Purpose::Encoder, name_key(name), 0);
                let freqs = (0..n_freq).map(|_| normal.sample(&mut rng)).collect();
                (name.to_string(), FourierEncoder::new(freqs))
            })
            .collect();
        TokenEncoders { n_freq, encoders }
    }

    pub fn with_defaults(seed: u64) -> Self {
        TokenEncoders::new(DEFAULT_N_FREQ, DEFAULT_SIGMA, seed)
    }

    pub fn n_freq(&self) -> usize {
        self.n_freq
    }

    pub fn token_width(&self) -> usize {
        2 * self.n_freq
    }

    pub fn get(&self, attribute: &str) -> Result<&FourierEncoder> {
        self.encoders
            .get(attribute)
            .ok_or_else(|| Error::Invalid(format!("no encoder for attribute {attribute:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SIDECAR_MAGIC);
        out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.encoders.len() as u32).to_le_bytes());
        for (name, enc) in &self.encoders {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(enc.frequencies.len() as u32).to_le_bytes());
            for f in &enc.frequencies {
                out.extend_from_slice(&f.to_le_bytes());
            }
        }
        out
    }

    /// Parses a sidecar; returns the encoders and the bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != SIDECAR_MAGIC {
            return Err(Error::ModelFormat("bad encoder sidecar magic".into()));
        }
        let version = r.u32()?;
        if version != SIDECAR_VERSION {
            return Err(Error::ModelFormat(format!("unsupported encoder sidecar version {version}")));
        }
        let count = r.u32()? as usize;
        let mut encoders = BTreeMap::new();
        let mut n_freq = None;
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::ModelFormat("attribute name is not UTF-8".into()))?
                .to_string();
            let n = r.u32()? as usize;
            if *n_freq.get_or_insert(n) != n {
                return Err(Error::ModelFormat("attributes disagree on frequency count".into()));
            }
            let freqs = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            encoders.insert(name, FourierEncoder::new(freqs));
        }
        for name in ATTRIBUTES {
            if !encoders.contains_key(name) {
                return Err(Error::ModelFormat(format!("sidecar lacks attribute {name:?}")));
            }
        }
        Ok((
            TokenEncoders {
                n_freq: n_freq.unwrap_or(0),
                encoders,
            },
            r.pos,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(TokenEncoders::from_bytes(&std::fs::read(path)?)?.0)
    }
}

const SIDECAR_MAGIC: &[u8; 4] = b"RLFE";
const SIDECAR_VERSION: u32 = 1;

pub(crate) struct ByteReader<'a> {
    pub bytes: &'a [u8],
    pub pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::ModelFormat(format!("unexpected end of data at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// One token slot: display name and the attribute whose encoder it uses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub attribute: &'static str,
}

const LIGHT_BLOCK: [&str; 8] = ["lambda", "d", "p.x", "p.y", "p.z", "c.r", "c.g", "c.b"];

/// Slot layout for an edit mode.
pub fn layout(mode: EditMode) -> Vec<Slot> {
    let slot = |name: String, attribute| Slot { name, attribute };
    let plain = |names: &[&'static str]| names.iter().map(|&n| slot(n.to_string(), n)).collect::<Vec<_>>();
    match mode {
        EditMode::Spatial => plain(&["a", "lambda", "d", "p.x", "p.y", "p.z", "c.r", "c.g", "c.b"]),
        EditMode::Visible => {
            let mut s = plain(&["a", "t", "lambda", "c.r", "c.g", "c.b"]);
            s.extend((0..MASK_GRID * MASK_GRID).map(|i| slot(format!("mask[{i}]"), "mask")));
            s
        }
        EditMode::Diffuse => plain(&["a", "d_g"]),
        EditMode::Multi => {
            let mut s = plain(&["a"]);
            for block in 0..MAX_MULTI_LIGHTS {
                s.extend(LIGHT_BLOCK.iter().map(|&n| slot(format!("{n}#{block}"), n)));
            }
            s
        }
    }
}

/// Number of tokens for a mode.
pub fn sequence_len(mode: EditMode) -> usize {
    layout(mode).len()
}

/// Ordered attribute tokens for one edit.
#[derive(Clone, Debug, PartialEq)]
pub struct TokenSequence {
    pub mode: EditMode,
    width: usize,
    values: Vec<f64>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.values.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }

    pub fn tokens(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    /// All tokens concatenated.
    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn slots(&self) -> Vec<Slot> {
        layout(self.mode)
    }
}

fn light_block_values(light: Option<&AddLight>) -> [f64; 8] {
    match light {
        Some(l) => [
            l.intensity,
            l.diffuse,
            l.position.x,
            l.position.y,
            l.position.z,
            l.color.x,
            l.color.y,
            l.color.z,
        ],
        None => [INACTIVE_SENTINEL; 8],
    }
}

fn raw_values(edit: &LightEdit) -> Vec<f64> {
    let a = edit.ambient_scale;
    match edit.mode() {
        EditMode::Spatial => {
            let mut v = vec![a];
            v.extend(light_block_values(edit.add_light.as_ref()));
            v
        }
        EditMode::Visible => {
            let f = edit.in_scene.as_ref().expect("visible edit has a fixture");
            let mut v = vec![a, if f.transition { 1.0 } else { 0.0 }, f.intensity, f.color.x, f.color.y, f.color.z];
            v.extend(pool_mask(&f.mask));
            v
        }
        EditMode::Diffuse => vec![a, edit.global_diffuse],
        EditMode::Multi => {
            let mut v = vec![a];
            for block in 0..MAX_MULTI_LIGHTS {
                v.extend(light_block_values(edit.multi_lights.get(block)));
            }
            v
        }
    }
}

/// Mask values fed to the mask tokens: 4×4 average pooling.
pub fn pool_mask(mask: &Mask) -> Vec<f64> {
    mask.pooled(MASK_GRID)
}

/// Encodes an edit with the layout of its mode.
pub fn encode_edit(edit: &LightEdit, encoders: &TokenEncoders) -> Result<TokenSequence> {
    let mode = edit.mode();
    let slots = layout(mode);
    let raw = raw_values(edit);
    debug_assert_eq!(raw.len(), slots.len());
    let width = encoders.token_width();
    let mut values = vec![0.0; slots.len() * width];
    for ((slot, v), out) in slots.iter().zip(&raw).zip(values.chunks_exact_mut(width)) {
        if !v.is_finite() {
            return Err(Error::Invalid(format!("attribute {} is not finite", slot.name)));
        }
        encoders.get(slot.attribute)?.encode_into(*v, out);
    }
    Ok(TokenSequence { mode, width, values })
}

/// The unconditional counterpart: same shape, every entry `-1`.
pub fn drop_for_cfg(seq: &TokenSequence) -> TokenSequence {
    TokenSequence {
        mode: seq.mode,
        width: seq.width,
        values: vec![DROP_FILL; seq.values.len()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::scene::InSceneLight;

    fn spatial_edit() -> LightEdit {
        LightEdit::spatial(
            0.8,
            AddLight {
                position: Vec3::new(0.1, -0.4, 0.9),
                color: Vec3::new(1.0, 0.5, 0.25),
                intensity: 0.6,
                diffuse: 0.2,
            },
        )
    }

    #[test]
    fn zero_encodes_to_cos_ones_sin_zeros() {
        let enc = TokenEncoders::with_defaults(3);
        let tok = fourier_encode(0.0, enc.get("a").unwrap()).unwrap();
        assert!(tok[..32].iter().all(|&c| c == 1.0));
        assert!(tok[32..].iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_frequency_substitution() {
        let enc = FourierEncoder::new(vec![0.5]);
        let tok = fourier_encode(1.0, &enc).unwrap();
        assert_eq!(tok[0], -1.0);
        assert!(tok[1].abs() < 1e-15);
    }

    #[test]
    fn non_finite_is_rejected() {
        let enc = FourierEncoder::new(vec![1.0]);
        assert!(fourier_encode(f64::NAN, &enc).is_err());
    }

    #[test]
    fn spatial_edit_has_nine_tokens() {
        let enc = TokenEncoders::with_defaults(0);
        let seq = encode_edit(&spatial_edit(), &enc).unwrap();
        assert_eq!(seq.len(), 9);
        assert_eq!(seq.width(), 64);
    }

    #[test]
    fn empty_mask_tokens_equal_encoded_zero() {
        let enc = TokenEncoders::with_defaults(0);
        let edit = LightEdit::visible(
            0.5,
            InSceneLight {
                mask: Mask::new(16, 16),
                color: Vec3::ONE,
                intensity: 0.3,
                transition: true,
            },
        );
        let seq = encode_edit(&edit, &enc).unwrap();
        let zero = fourier_encode(0.0, enc.get("mask").unwrap()).unwrap();
        for i in 6..22 {
            assert_eq!(seq.token(i), zero.as_slice());
        }
    }

    #[test]
    fn inactive_blocks_encode_sentinel() {
        let enc = TokenEncoders::with_defaults(0);
        let edit = LightEdit::multi(0.5, vec![spatial_edit().add_light.unwrap()]);
        let seq = encode_edit(&edit, &enc).unwrap();
        assert_eq!(seq.len(), 25);
        let layout = seq.slots();
        for i in 9..25 {
            let expected = fourier_encode(-1.0, enc.get(layout[i].attribute).unwrap()).unwrap();
            assert_eq!(seq.token(i), expected.as_slice(), "slot {}", layout[i].name);
        }
    }

    #[test]
    fn drop_fills_minus_one_and_is_idempotent() {
        let enc = TokenEncoders::with_defaults(0);
        let seq = encode_edit(&spatial_edit(), &enc).unwrap();
        let dropped = drop_for_cfg(&seq);
        assert_eq!(dropped.len(), 9);
        assert_eq!(dropped.width(), seq.width());
        assert!(dropped.flat().iter().all(|&v| v == -1.0));
        assert_eq!(drop_for_cfg(&dropped), dropped);
    }

    #[test]
    fn sidecar_round_trip_is_exact() {
        let enc = TokenEncoders::new(8, 5.0, 42);
        let bytes = enc.to_bytes();
        let (back, used) = TokenEncoders::from_bytes(&bytes).unwrap();
        assert_eq!(used, bytes.len());
        assert_eq!(back, enc);
        assert!(TokenEncoders::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn frequencies_have_requested_spread() {
        let enc = TokenEncoders::new(4096, 5.0, 1);
        let f = &enc.get("p.x").unwrap().frequencies;
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / f.len() as f64;
        assert!(mean.abs() < 0.3, "{mean}");
        assert!((var.sqrt() - 5.0).abs() < 0.25, "{}", var.sqrt());
    }

    #[test]
    fn attributes_get_distinct_frequencies() {
        let enc = TokenEncoders::with_defaults(0);
        assert_ne!(enc.get("p.x").unwrap(), enc.get("p.y").unwrap());
    }
}
