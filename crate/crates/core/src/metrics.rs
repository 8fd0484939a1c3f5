//! Precision protocol and masked image-quality metrics.
//!
//! A model is asked to relight a scene with a point light at each of 32
//! positions along a straight trajectory. `M[i][j]` is the masked error
//! between the prediction for position `j` and the ground truth at `i`:
//!
//! ```text
//! A   = (1/n) Σᵢ M[i][i]
//! B_w = Σ_{i≠j} |i−j|·M[i][j] / Σ_{i≠j} |i−j|
//! ```
//!
//! Low `A` means accurate predictions; `B_w / A > 1` means predictions move
//! with the light instead of ignoring it. All metrics here work on
//! tone-mapped images in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::image::{Image, Mask};
use crate::math::Vec3;
use crate::{Error, Result};

pub const TRAJECTORY_STEPS: usize = 32;
/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Evenly spaced light positions on a segment parallel to one axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub axis: Axis,
    pub start: Vec3,
    pub end: Vec3,
    pub positions: Vec<Vec3>,
}

impl Trajectory {
    pub fn new(axis: Axis, start: Vec3, end: Vec3, steps: usize) -> Self {
        let positions = (0..steps)
            .map(|k| {
                let t = if steps > 1 { k as f64 / (steps - 1) as f64 } else { 0.0 };
                start + (end - start) * t
            })
            .collect();
        Trajectory {
            axis,
            start,
            end,
            positions,
        }
    }
}

/// Endpoint pairs of the six preset trajectories, two per axis, all inside
/// the canonical cube and above the ground plane of the preset scenes.
pub const TRAJECTORY_PRESETS: [(Axis, [f64; 3], [f64; 3]); 6] = [
    (Axis::X, [-0.8, 0.7, 0.6], [0.8, 0.7, 0.6]),
    (Axis::X, [-0.8, 0.35, 0.9], [0.8, 0.35, 0.9]),
    (Axis::Y, [0.6, -0.3, 0.6], [0.6, 0.9, 0.6]),
    (Axis::Y, [-0.5, -0.3, 0.8], [-0.5, 0.9, 0.8]),
    (Axis::Z, [0.5, 0.7, -0.8], [0.5, 0.7, 0.9]),
    (Axis::Z, [-0.6, 0.5, -0.8], [-0.6, 0.5, 0.9]),
];

pub fn build_trajectories() -> Vec<Trajectory> {
    TRAJECTORY_PRESETS
        .iter()
        .map(|&(axis, a, b)| Trajectory::new(axis, Vec3::from(a), Vec3::from(b), TRAJECTORY_STEPS))
        .collect()
}

/// Square error matrix, row = ground-truth position, column = conditioning
/// position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub n: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl ConfusionMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        ConfusionMatrix { n, values }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn is_valid(&self) -> bool {
        self.values.len() == self.n * self.n && self.values.iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.n {
            let row: Vec<String> = self.row(i).iter().map(|v| format!("{v:e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Heat map normalized by the largest entry (black = 0, white = max).
    pub fn heat_image(&self) -> Image {
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        let mut img = Image::new(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let v = if max > 0.0 { (self.get(i, j) / max) as f32 } else { 0.0 };
                img.set(j, i, [v, v, v]);
            }
        }
        img
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrecisionMetrics {
    pub a: f64,
    pub b_w: f64,
    /// `B_w / A`; `+∞` when `A = 0` (serialized as `null`).
    pub ratio: f64,
}

pub fn precision_metrics(m: &ConfusionMatrix) -> Result<PrecisionMetrics> {
    if !m.is_valid() || m.n == 0 {
        return Err(Error::Invalid("confusion matrix must be square, finite and non-negative".into()));
    }
    let n = m.n;
    let a = (0..n).map(|i| m.get(i, i)).sum::<f64>() / n as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let w = i.abs_diff(j) as f64;
                num += w * m.get(i, j);
                den += w;
            }
        }
    }
    let b_w = if den > 0.0 { num / den } else { 0.0 };
    let ratio = if a > 0.0 { b_w / a } else { f64::INFINITY };
    Ok(PrecisionMetrics { a, b_w, ratio })
}

/// Mean squared error over the three channels of every masked pixel.
pub fn masked_mse(a: &Image, b: &Image, mask: &Mask) -> Result<f64> {
    a.check_same_dims(b)?;
    if mask.width != a.width() || mask.height != a.height() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            found: (mask.width, mask.height),
        });
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let mut sum = 0.0;
    for (p, on) in mask.bits.iter().enumerate() {
        if *on {
            for c in 0..3 {
                let d = a.data()[p * 3 + c] as f64 - b.data()[p * 3 + c] as f64;
                sum += d * d;
            }
        }
    }
    Ok(sum / (3 * mask.count()) as f64)
}

/// PSNR with peak 1 over the masked pixels, capped at [`PSNR_CAP_DB`].
pub fn masked_psnr(a: &Image, b: &Image, mask: &Mask) -> Result<f64> {
    let mse = masked_mse(a, b, mask)?;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// `M[i][j] = masked_mse(pred[j], gt[i])`.
pub fn confusion_matrix(gt: &[Image], pred: &[Image], mask: &Mask) -> Result<ConfusionMatrix> {
    if gt.len() != pred.len() {
        return Err(Error::Invalid(format!(
            "{} ground-truth images but {} predictions",
            gt.len(),
            pred.len()
        )));
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let n = gt.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            values[i * n + j] = masked_mse(&pred[j], &gt[i], mask)?;
        }
    }
    Ok(ConfusionMatrix { n, values })
}

/// Rec. 709 luma.
pub fn luma(img: &Image) -> Vec<f64> {
    img.data()
        .chunks_exact(3)
        .map(|p| 0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64)
        .collect()
}

/// Mean SSIM over all 8×8 windows (stride 1) of the luma channel. Images
/// smaller than a window are treated as a single window.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.check_same_dims(b)?;
    let (w, h) = a.dims();
    let (la, lb) = (luma(a), luma(b));
    let (ww, wh) = (SSIM_WINDOW.min(w), SSIM_WINDOW.min(h));
    if ww == 0 || wh == 0 {
        return Err(Error::Invalid("SSIM of an empty image".into()));
    }
    let mut total = 0.0;
    let mut windows = 0usize;
    for y0 in 0..=h - wh {
        for x0 in 0..=w - ww {
            let n = (ww * wh) as f64;
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for y in y0..y0 + wh {
                for x in x0..x0 + ww {
                    let (p, q) = (la[y * w + x], lb[y * w + x]);
                    sa += p;
                    sb += q;
                    saa += p * p;
                    sbb += q * q;
                    sab += p * q;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = (saa / n - ma * ma).max(0.0);
            let vb = (sbb / n - mb * mb).max(0.0);
            let cov = sab / n - ma * mb;
            total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties; 0 if either
/// input is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectories_cover_each_axis_twice() {
        let t = build_trajectories();
        assert_eq!(t.len(), 6);
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            assert_eq!(t.iter().filter(|t| t.axis == axis).count(), 2);
        }
        for traj in &t {
            assert_eq!(traj.positions.len(), 32);
            let step = traj.positions[1] - traj.positions[0];
            for w in traj.positions.windows(2) {
                assert!(((w[1] - w[0]) - step).length() < 1e-12);
            }
            for p in &traj.positions {
                assert!(p.to_array().iter().all(|c| c.abs() <= 1.0));
            }
        }
    }

    #[test]
    fn all_zero_matrix() {
        let m = precision_metrics(&ConfusionMatrix::from_fn(32, |_, _| 0.0)).unwrap();
        assert_eq!((m.a, m.b_w), (0.0, 0.0));
        assert!(m.ratio.is_infinite());
    }

    #[test]
    fn psnr_substitution_and_cap() {
        let a = Image::filled(2, 2, [0.5; 3]);
        let b = Image::filled(2, 2, [0.6; 3]);
        let mask = Mask::full(2, 2);
        assert!((masked_psnr(&a, &b, &mask).unwrap() - 20.0).abs() < 1e-5);
        assert_eq!(masked_psnr(&a, &a, &mask).unwrap(), 99.0);
        assert!(matches!(masked_psnr(&a, &b, &Mask::new(2, 2)), Err(Error::EmptyMask)));
    }

    #[test]
    fn corruption_outside_mask_is_ignored() {
        let a = Image::filled(3, 1, [0.5; 3]);
        let mut b = Image::filled(3, 1, [0.4; 3]);
        let mut mask = Mask::new(3, 1);
        mask.set(0, 0, true);
        let before = masked_psnr(&a, &b, &mask).unwrap();
        b.set(2, 0, [1.0, 0.0, 1.0]);
        assert_eq!(masked_psnr(&a, &b, &mask).unwrap(), before);
    }

    #[test]
    fn column_constant_predictions() {
        let gt: Vec<Image> = (0..4).map(|i| Image::filled(2, 2, [i as f32 * 0.1; 3])).collect();
        let pred = vec![gt[0].clone(); 4];
        let mask = Mask::full(2, 2);
        let m = confusion_matrix(&gt, &pred, &mask).unwrap();
        for i in 0..4 {
            let expected = masked_mse(&gt[0], &gt[i], &mask).unwrap();
            assert!(m.row(i).iter().all(|&v| v == expected));
        }
    }

    #[test]
    fn ssim_identity_symmetry_and_constants() {
        let a = Image::filled(10, 9, [0.5; 3]);
        let b = Image::filled(10, 9, [0.25; 3]);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let closed = (2.0 * 0.5 * 0.25 + SSIM_C1) / (0.25 + 0.0625 + SSIM_C1);
        assert!((ssim(&a, &b).unwrap() - closed).abs() < 1e-9);
        let mut c = a.clone();
        c.set(3, 3, [0.9, 0.1, 0.2]);
        assert_eq!(ssim(&a, &c).unwrap(), ssim(&c, &a).unwrap());
    }

    #[test]
    fn spearman_handles_ties_and_direction() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), 0.0);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }
}
