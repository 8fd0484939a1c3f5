//! A small conditional flow-matching relighter.
//!
//! Training regresses the straight-line velocity between noise `ε` and the
//! target `X` along the interpolant `z_τ = (1−τ)·ε + τ·X`:
//!
//! ```text
//! L(θ) = mean ‖u_θ(z_τ, τ, I, ΔL) − (X − ε)‖²
//! ```
//!
//! `u_θ` wraps an MLP over the concatenation `[z_τ ‖ I ‖ tokens(ΔL) ‖ γ(τ)]`
//! with two SiLU hidden layers. The MLP predicts the clean image `x̂` and
//! the velocity is `u = (x̂ − z_τ) / (1 − τ)`, so a hidden layer narrower
//! than the image never has to carry the noise through. Gradients are
//! computed by hand-written backpropagation. Sampling integrates the learned field with Euler steps
//! and classifier-free guidance.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use crate::compositor::TrainingPair;
use crate::image::{DisplayImage, Image};
use crate::rng::{keyed_rng, Purpose};
use crate::scene::{EditMode, LightEdit};
use crate::tokenizer::{drop_for_cfg, encode_edit, sequence_len, ByteReader, TokenEncoders, DROP_FILL};
use crate::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 256;
/// Largest value an output pixel may take; representable in `f32`.
pub const OUTPUT_MAX: f64 = 1.0 - 1.0 / (1u64 << 24) as f64;

/// `(1−τ)·ε + τ·X`.
pub fn interpolate(x: &[f64], eps: &[f64], tau: f64) -> Result<Vec<f64>> {
    if x.len() != eps.len() {
        return Err(Error::Invalid(format!("X has {} entries but ε has {}", x.len(), eps.len())));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Invalid(format!("τ = {tau} outside [0, 1]")));
    }
    Ok(x.iter().zip(eps).map(|(x, e)| (1.0 - tau) * e + tau * x).collect())
}

/// One training sample.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSample {
    pub x: Vec<f64>,
    pub input: Vec<f64>,
    pub cond: Vec<f64>,
    pub eps: Vec<f64>,
    pub tau: f64,
}

impl FlowSample {
    pub fn z(&self) -> Vec<f64> {
        self.x.iter().zip(&self.eps).map(|(x, e)| (1.0 - self.tau) * e + self.tau * x).collect()
    }

    pub fn velocity_target(&self) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().zip(&self.eps).map(|(x, e)| x - e)
    }
}

pub type FlowBatch = Vec<FlowSample>;

/// Anything that predicts a velocity for `(z, τ, I, cond)`.
pub trait VelocityField {
    fn velocity(&self, z: &[f64], tau: f64, input: &[f64], cond: &[f64]) -> Vec<f64>;
}

/// Mean over the batch of the squared L2 velocity error.
pub fn fm_loss<F: VelocityField + ?Sized>(net: &F, batch: &[FlowSample]) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let total: f64 = batch
        .iter()
        .map(|s| {
            let u = net.velocity(&s.z(), s.tau, &s.input, &s.cond);
            u.iter().zip(s.velocity_target()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>()
        })
        .sum();
    total / batch.len() as f64
}

/// Weights and biases of the three affine layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
    pub w3: Array2<f64>,
    pub b3: Array1<f64>,
}

impl Params {
    fn zeros(d_in: usize, hidden: usize, d_out: usize) -> Self {
        Params {
            w1: Array2::zeros((d_in, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array2::zeros((hidden, hidden)),
            b2: Array1::zeros(hidden),
            w3: Array2::zeros((hidden, d_out)),
            b3: Array1::zeros(d_out),
        }
    }

    fn zeros_like(&self) -> Self {
        Params::zeros(self.w1.nrows(), self.w1.ncols(), self.w3.ncols())
    }

    pub fn slices(&self) -> [&[f64]; 6] {
        [
            self.w1.as_slice().unwrap(),
            self.b1.as_slice().unwrap(),
            self.w2.as_slice().unwrap(),
            self.b2.as_slice().unwrap(),
            self.w3.as_slice().unwrap(),
            self.b3.as_slice().unwrap(),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 6] {
        [
            self.w1.as_slice_mut().unwrap(),
            self.b1.as_slice_mut().unwrap(),
            self.w2.as_slice_mut().unwrap(),
            self.b2.as_slice_mut().unwrap(),
            self.w3.as_slice_mut().unwrap(),
            self.b3.as_slice_mut().unwrap(),
        ]
    }

    pub fn len(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parameter `k` in the flat order `w1, b1, w2, b2, w3, b3`.
    pub fn get(&self, mut k: usize) -> f64 {
        for s in self.slices() {
            if k < s.len() {
                return s[k];
            }
            k -= s.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set(&mut self, mut k: usize, v: f64) {
        for s in self.slices_mut() {
            if k < s.len() {
                s[k] = v;
                return;
            }
            k -= s.len();
        }
        panic!("parameter index out of range");
    }

    pub fn scaled(&self, f: f64) -> Params {
        let mut p = self.clone();
        for s in p.slices_mut() {
            s.iter_mut().for_each(|v| *v *= f);
        }
        p
    }
}

/// Floor on `1 − τ` in the velocity parameterization. Equal to the last
/// step size of a 50-step sampler, so samplers with up to 50 steps land
/// exactly on the predicted image.
pub const MIN_REMAINING: f64 = 0.02;

fn remaining(tau: f64) -> f64 {
    (1.0 - tau).max(MIN_REMAINING)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

struct Activations {
    h1: Array2<f64>,
    a1: Array2<f64>,
    h2: Array2<f64>,
    a2: Array2<f64>,
    out: Array2<f64>,
}

/// The toy velocity network for one edit mode and image size.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyNet {
    pub mode: EditMode,
    pub width: usize,
    pub height: usize,
    pub params: Params,
    encoders: TokenEncoders,
}

impl ToyNet {
    /// Fresh network with weights drawn from `U(−1/√fan_in, 1/√fan_in)`
    /// and zero biases.
    pub fn new(mode: EditMode, width: usize, height: usize, hidden: usize, encoders: TokenEncoders, seed: u64) -> Self {
        let image_len = 3 * width * height;
        let cond_len = sequence_len(mode) * encoders.token_width();
        let d_in = 2 * image_len + cond_len + encoders.token_width();
        let mut params = Params::zeros(d_in, hidden, image_len);
        let mut rng = keyed_rng(seed, Purpose::Init, 0, 0);
        for (w, fan_in) in [
            (&mut params.w1, d_in),
            (&mut params.w2, hidden),
            (&mut params.w3, hidden),
        ] {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
            w.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
        }
        ToyNet {
            mode,
            width,
            height,
            params,
            encoders,
        }
    }

    pub fn encoders(&self) -> &TokenEncoders {
        &self.encoders
    }

    pub fn image_len(&self) -> usize {
        3 * self.width * self.height
    }

    pub fn cond_len(&self) -> usize {
        sequence_len(self.mode) * self.encoders.token_width()
    }

    pub fn input_dim(&self) -> usize {
        self.params.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.params.w1.ncols()
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn write_row(&self, row: &mut [f64], z: &[f64], tau: f64, input: &[f64], cond: &[f64]) {
        let n = self.image_len();
        let c = self.cond_len();
        assert_eq!(z.len(), n, "z has the wrong length");
        assert_eq!(input.len(), n, "input image has the wrong length");
        assert_eq!(cond.len(), c, "conditioning has the wrong length");
        row[..n].copy_from_slice(z);
        row[n..2 * n].copy_from_slice(input);
        row[2 * n..2 * n + c].copy_from_slice(cond);
        self.encoders
            .get("tau")
            .expect("tau encoder")
            .encode_into(tau, &mut row[2 * n + c..]);
    }

    fn batch_inputs(&self, batch: &[FlowSample]) -> Array2<f64> {
        let mut xin = Array2::zeros((batch.len(), self.input_dim()));
        for (mut row, s) in xin.axis_iter_mut(Axis(0)).zip(batch) {
            self.write_row(row.as_slice_mut().unwrap(), &s.z(), s.tau, &s.input, &s.cond);
        }
        xin
    }

    fn forward(&self, xin: ArrayView2<f64>) -> Activations {
        let p = &self.params;
        let h1 = xin.dot(&p.w1) + &p.b1;
        let a1 = h1.mapv(silu);
        let h2 = a1.dot(&p.w2) + &p.b2;
        let a2 = h2.mapv(silu);
        let out = a2.dot(&p.w3) + &p.b3;
        Activations { h1, a1, h2, a2, out }
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn loss_and_grad(&self, batch: &[FlowSample]) -> (f64, Params) {
        let mut g = self.params.zeros_like();
        if batch.is_empty() {
            return (0.0, g);
        }
        let xin = self.batch_inputs(batch);
        let act = self.forward(xin.view());
        let b = batch.len() as f64;
        // Residual u − (X − ε), then its gradient pulled back through
        // u = (x̂ − z) / remaining(τ).
        let mut dout = act.out;
        let mut loss = 0.0;
        for (mut row, s) in dout.axis_iter_mut(Axis(0)).zip(batch) {
            let r = remaining(s.tau);
            for ((o, v), z) in row.iter_mut().zip(s.velocity_target()).zip(s.z()) {
                let d = (*o - z) / r - v;
                loss += d * d;
                *o = 2.0 * d / (b * r);
            }
        }
        loss /= b;
        let p = &self.params;
        g.w3 = act.a2.t().dot(&dout);
        g.b3 = dout.sum_axis(Axis(0));
        let mut dh2 = dout.dot(&p.w3.t());
        dh2.zip_mut_with(&act.h2, |d, &h| *d *= silu_grad(h));
        g.w2 = act.a1.t().dot(&dh2);
        g.b2 = dh2.sum_axis(Axis(0));
        let mut dh1 = dh2.dot(&p.w2.t());
        dh1.zip_mut_with(&act.h1, |d, &h| *d *= silu_grad(h));
        g.w1 = xin.t().dot(&dh1);
        g.b1 = dh1.sum_axis(Axis(0));
        (loss, g)
    }

    /// Gradient of [`fm_loss`] with respect to θ.
    pub fn grad(&self, batch: &[FlowSample]) -> Params {
        self.loss_and_grad(batch).1
    }

    /// Conditioning vector for an edit: its tokens, concatenated.
    pub fn encode(&self, edit: &LightEdit) -> Result<Vec<f64>> {
        if edit.mode() != self.mode {
            return Err(Error::Invalid(format!(
                "model is trained for {} edits, got a {} edit",
                self.mode.name(),
                edit.mode().name()
            )));
        }
        Ok(encode_edit(edit, &self.encoders)?.flat().to_vec())
    }

    pub fn example_from_pair(&self, pair: &TrainingPair) -> Result<Example> {
        for img in [&pair.input, &pair.target] {
            if img.dims() != (self.width, self.height) {
                return Err(Error::DimensionMismatch {
                    expected: (self.width, self.height),
                    found: img.dims(),
                });
            }
        }
        Ok(Example {
            input: pair.input.to_f64(),
            target: pair.target.to_f64(),
            cond: self.encode(&pair.edit)?,
        })
    }

    /// Relights `input` according to `edit`.
    pub fn relight(&self, input: &DisplayImage, edit: &LightEdit, cfg: &SamplerConfig) -> Result<DisplayImage> {
        if input.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: input.dims(),
            });
        }
        let seq = encode_edit(edit, &self.encoders)?;
        if seq.mode != self.mode {
            return Err(Error::Invalid(format!("model expects {} edits", self.mode.name())));
        }
        let out = sample(self, &input.to_f64(), seq.flat(), cfg)?;
        Image::from_f64(self.width, self.height, &out)
    }
}

impl VelocityField for ToyNet {
    fn velocity(&self, z: &[f64], tau: f64, input: &[f64], cond: &[f64]) -> Vec<f64> {
        let mut xin = Array2::zeros((1, self.input_dim()));
        self.write_row(xin.as_slice_mut().unwrap(), z, tau, input, cond);
        let r = remaining(tau);
        let xhat = self.forward(xin.view()).out;
        xhat.iter().zip(z).map(|(x, z)| (x - z) / r).collect()
    }
}

/// A training example: conditioning image, target and edit tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub cond: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// Peak learning rate.
    pub lr: f64,
    /// Cosine-decay the learning rate to zero over `steps`.
    pub cosine_decay: bool,
    pub weight_decay: f64,
    pub betas: (f64, f64),
    pub adam_eps: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub cfg_drop_prob: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            cosine_decay: true,
            weight_decay: 0.01,
            betas: (0.9, 0.95),
            adam_eps: 1e-8,
            steps: 2000,
            batch_size: 32,
            cfg_drop_prob: 0.1,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn lr_at(&self, step: usize) -> f64 {
        if !self.cosine_decay || self.steps == 0 {
            return self.lr;
        }
        let progress = step as f64 / self.steps as f64;
        0.5 * self.lr * (1.0 + (std::f64::consts::PI * progress).cos())
    }
}

/// Per-step losses and a non-increasing smoothed curve (running minimum
/// of an exponential moving average).
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize)]
pub struct LossCurve {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    #[serde(skip)]
    ema: f64,
}

pub const LOSS_EMA: f64 = 0.98;

impl LossCurve {
    fn push(&mut self, loss: f64) {
        self.ema = if self.raw.is_empty() {
            loss
        } else {
            LOSS_EMA * self.ema + (1.0 - LOSS_EMA) * loss
        };
        self.raw.push(loss);
        let s = self.smoothed.last().map_or(self.ema, |&m| m.min(self.ema));
        self.smoothed.push(s);
    }
}

/// Upper end of the training range of `τ`. Above it the floor in the
/// velocity map makes the target unreachable, and no sampler with at most
/// `1/MIN_REMAINING` steps ever evaluates the network there.
pub const TAU_MAX: f64 = 1.0 - MIN_REMAINING;

/// Draws the batch for one training step from its own keyed stream.
/// Sample `b` takes `τ` uniformly from the `b`-th of `batch_size` equal
/// strata of `[0, TAU_MAX)`, so each `τ` is marginally uniform on that range.
pub fn draw_batch(data: &[Example], cfg: &TrainConfig, step: usize) -> FlowBatch {
    let mut rng = keyed_rng(cfg.seed, Purpose::Training, step as u64, 0);
    let n = cfg.batch_size as f64;
    (0..cfg.batch_size)
        .map(|b| {
            let ex = &data[rng.random_range(0..data.len())];
            let dropped = rng.random::<f64>() < cfg.cfg_drop_prob;
            let tau = TAU_MAX * (b as f64 + rng.random::<f64>()) / n;
            let eps = (0..ex.target.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
            FlowSample {
                x: ex.target.clone(),
                input: ex.input.clone(),
                cond: if dropped { vec![DROP_FILL; ex.cond.len()] } else { ex.cond.clone() },
                eps,
                tau,
            }
        })
        .collect()
}

/// AdamW with decoupled weight decay. Deterministic given `cfg.seed`.
pub fn train(net: &mut ToyNet, data: &[Example], cfg: &TrainConfig) -> Result<LossCurve> {
    if data.is_empty() {
        return Err(Error::Invalid("training needs at least one example".into()));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Invalid("batch size must be >= 1".into()));
    }
    for ex in data {
        if ex.input.len() != net.image_len() || ex.target.len() != net.image_len() || ex.cond.len() != net.cond_len() {
            return Err(Error::Invalid("example shape does not match the network".into()));
        }
    }
    let (b1, b2) = cfg.betas;
    let mut m = net.params.zeros_like();
    let mut v = net.params.zeros_like();
    let mut curve = LossCurve::default();
    for step in 0..cfg.steps {
        let batch = draw_batch(data, cfg, step);
        let (loss, g) = net.loss_and_grad(&batch);
        if !loss.is_finite() {
            return Err(Error::Diverged { step, loss });
        }
        curve.push(loss);
        let t = (step + 1) as i32;
        let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
        let lr = cfg.lr_at(step);
        for (((p, g), m), v) in net
            .params
            .slices_mut()
            .into_iter()
            .zip(g.slices())
            .zip(m.slices_mut())
            .zip(v.slices_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.adam_eps);
                p[i] -= lr * (update + cfg.weight_decay * p[i]);
            }
        }
    }
    Ok(curve)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub steps: usize,
    pub guidance: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            steps: 50,
            guidance: 2.0,
            seed: 0,
        }
    }
}

/// Standard normal starting point `z₀` for a sampler run.
pub fn initial_noise(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = keyed_rng(seed, Purpose::Sampling, 0, 0);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Euler integration from `τ = 0` to `1` in `cfg.steps` steps with
/// guidance `v = u_∅ + w·(u_c − u_∅)`. `w = 1` evaluates only the
/// conditional branch and `w = 0` only the unconditional one. The result is
/// clamped to `[0, OUTPUT_MAX]`.
pub fn sample<F: VelocityField + ?Sized>(net: &F, input: &[f64], cond: &[f64], cfg: &SamplerConfig) -> Result<Vec<f64>> {
    let z0 = initial_noise(cfg.seed, input.len());
    Ok(integrate(net, z0, input, cond, cfg)?
        .into_iter()
        .map(|v| v.clamp(0.0, OUTPUT_MAX))
        .collect())
}

/// Unclamped Euler integration starting from `z`.
pub fn integrate<F: VelocityField + ?Sized>(
    net: &F,
    mut z: Vec<f64>,
    input: &[f64],
    cond: &[f64],
    cfg: &SamplerConfig,
) -> Result<Vec<f64>> {
    if cfg.steps == 0 {
        return Err(Error::Invalid("sampler needs at least one step".into()));
    }
    if !cfg.guidance.is_finite() {
        return Err(Error::Invalid("guidance scale must be finite".into()));
    }
    let uncond = vec![DROP_FILL; cond.len()];
    let n = cfg.steps as f64;
    let w = cfg.guidance;
    for k in 0..cfg.steps {
        let tau = k as f64 / n;
        let v = if w == 1.0 {
            net.velocity(&z, tau, input, cond)
        } else if w == 0.0 {
            net.velocity(&z, tau, input, &uncond)
        } else {
            let u0 = net.velocity(&z, tau, input, &uncond);
            let u1 = net.velocity(&z, tau, input, cond);
            u0.iter().zip(&u1).map(|(a, b)| a + w * (b - a)).collect()
        };
        for (zi, vi) in z.iter_mut().zip(&v) {
            *zi += vi / n;
        }
    }
    Ok(z)
}

const MODEL_MAGIC: &[u8; 4] = b"RLFM";
const MODEL_VERSION: u32 = 1;

impl ToyNet {
    /// Versioned binary: header, parameters as little-endian `f64`, then
    /// the encoder sidecar.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        let mode = self.mode.name().as_bytes();
        out.extend_from_slice(&(mode.len() as u32).to_le_bytes());
        out.extend_from_slice(mode);
        for v in [self.width, self.height, self.hidden()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for s in self.params.slices() {
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            for v in s {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&self.encoders.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader { bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::ModelFormat("not a model file".into()));
        }
        let version = r.u32()?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported model version {version}")));
        }
        let len = r.u32()? as usize;
        let mode: EditMode = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::ModelFormat("mode is not UTF-8".into()))?
            .parse()?;
        let width = r.u32()? as usize;
        let height = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let mut raw = Vec::new();
        for _ in 0..6 {
            let n = r.u64()? as usize;
            if n > bytes.len() / 8 {
                return Err(Error::ModelFormat("parameter block larger than the file".into()));
            }
            raw.push((0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?);
        }
        let (encoders, _) = TokenEncoders::from_bytes(&bytes[r.pos..])?;
        let mut net = ToyNet::new(mode, width, height, hidden, encoders, 0);
        for (dst, src) in net.params.slices_mut().into_iter().zip(&raw) {
            if dst.len() != src.len() {
                return Err(Error::ModelFormat("parameter shapes do not match the header".into()));
            }
            dst.copy_from_slice(src);
        }
        Ok(net)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        ToyNet::from_bytes(&std::fs::read(path)?)
    }
}

/// Identity-style baseline: the velocity field of `X = I`, used to
/// measure what copying the input achieves.
pub fn copy_baseline(input: &DisplayImage) -> DisplayImage {
    input.map(|v| v.clamp(0.0, OUTPUT_MAX as f32))
}

/// Conditioning of the unconditional branch for a mode and encoder set.
pub fn unconditional(edit: &LightEdit, encoders: &TokenEncoders) -> Result<Vec<f64>> {
    Ok(drop_for_cfg(&encode_edit(edit, encoders)?).flat().to_vec())
}
