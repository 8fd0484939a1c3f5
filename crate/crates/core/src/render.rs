//! Deterministic direct-lighting renderer.
//!
//! Produces linear-RGB component renders: one image per local light and one
//! for the environment (ambient) term. Surfaces are two-sided Lambertian and
//! only direct illumination is computed, so a full render is exactly the sum
//! of its components.
//!
//! Sampling is stratified and every random pattern is expressed in the
//! camera frame before it is mapped to world space. Rendering a
//! similarity-transformed scene with the correspondingly transformed camera
//! therefore reuses the same sample pattern, mapped through the transform.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::image::{Image, LinearImage, Mask};
use crate::math::{Mat3, Vec3};
use crate::rng::{keyed_rng, Purpose};
use crate::scene::{Camera, LightKind, LightSpec, Primitive, Scene};
use crate::{Error, Result};

/// How environment-map lighting is integrated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvEstimator {
    /// Cosine-weighted hemisphere Monte Carlo with `env_samples` samples.
    #[default]
    CosineMonteCarlo,
    /// Deterministic sum over every non-zero texel, one shadow ray each.
    /// Exact for a nearest-texel map; suited to sparse maps such as a
    /// point-light surrogate.
    TexelQuadrature,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    /// Samples on the light surface per pixel.
    pub shadow_samples: u32,
    /// Hemisphere samples per pixel for environment lighting.
    pub env_samples: u32,
    pub seed: u64,
    /// Random stream; [`render_full`] gives light `i` stream `i`.
    #[serde(default)]
    pub stream: u64,
    #[serde(default)]
    pub env_estimator: EnvEstimator,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            shadow_samples: 16,
            env_samples: 64,
            seed: 0,
            stream: 0,
            env_estimator: EnvEstimator::CosineMonteCarlo,
        }
    }
}

impl RenderSettings {
    pub fn with_stream(self, stream: u64) -> Self {
        RenderSettings { stream, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        RenderSettings { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.shadow_samples == 0 || self.env_samples == 0 {
            return Err(Error::Invalid("shadow_samples and env_samples must be >= 1".into()));
        }
        Ok(())
    }
}

/// Nearest surface hit along a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Vec3,
    /// Unit normal, flipped to face the ray origin.
    pub normal: Vec3,
    pub albedo: Vec3,
    pub primitive: usize,
}

/// Nearest intersection with `t > 0`, in units of `direction`'s length.
pub fn intersect(scene: &Scene, origin: Vec3, direction: Vec3) -> Option<Hit> {
    intersect_range(scene, origin, direction, 0.0, f64::INFINITY)
}

fn intersect_range(scene: &Scene, o: Vec3, d: Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
    let mut best: Option<(f64, Vec3, usize)> = None;
    let mut limit = t_max;
    for (i, prim) in scene.primitives.iter().enumerate() {
        if let Some((t, n)) = hit_primitive(prim, o, d, t_min, limit) {
            limit = t;
            best = Some((t, n, i));
        }
    }
    best.map(|(t, n, i)| {
        let n = if n.dot(d) > 0.0 { -n } else { n };
        Hit {
            t,
            point: o + d * t,
            normal: n,
            albedo: scene.primitives[i].albedo(),
            primitive: i,
        }
    })
}

fn occluded(scene: &Scene, o: Vec3, d: Vec3, t_max: f64) -> bool {
    scene
        .primitives
        .iter()
        .any(|p| hit_primitive(p, o, d, 0.0, t_max).is_some())
}

/// Returns `(t, outward normal)` for the nearest hit in `(t_min, t_max)`.
fn hit_primitive(prim: &Primitive, o: Vec3, d: Vec3, t_min: f64, t_max: f64) -> Option<(f64, Vec3)> {
    match prim {
        Primitive::Sphere { center, radius, .. } => {
            let oc = o - *center;
            let a = d.dot(d);
            let half_b = oc.dot(d);
            let c = oc.dot(oc) - radius * radius;
            let disc = half_b * half_b - a * c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            // Stable quadratic roots.
            let q = -half_b - sq.copysign(half_b);
            let (mut t0, mut t1) = if q != 0.0 { (q / a, c / q) } else { (0.0, 0.0) };
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            let t = if t0 > t_min && t0 < t_max {
                t0
            } else if t1 > t_min && t1 < t_max {
                t1
            } else {
                return None;
            };
            Some((t, (o + d * t - *center) / *radius))
        }
        Primitive::Plane { point, normal, .. } => {
            let denom = normal.dot(d);
            if denom.abs() < 1e-300 {
                return None;
            }
            let t = normal.dot(*point - o) / denom;
            (t > t_min && t < t_max).then_some((t, *normal))
        }
        Primitive::Cuboid {
            min, max, rotation, ..
        } => {
            let center = (*min + *max) * 0.5;
            let half = (*max - *min) * 0.5;
            let inv = rotation.transpose();
            let lo = inv * (o - center);
            let ld = inv * d;
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut near_axis = 0;
            let mut far_axis = 0;
            for axis in 0..3 {
                let (oa, da, h) = (lo[axis], ld[axis], half[axis]);
                if da == 0.0 {
                    if oa < -h || oa > h {
                        return None;
                    }
                    continue;
                }
                let mut t0 = (-h - oa) / da;
                let mut t1 = (h - oa) / da;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                if t0 > t_near {
                    t_near = t0;
                    near_axis = axis;
                }
                if t1 < t_far {
                    t_far = t1;
                    far_axis = axis;
                }
                if t_near > t_far {
                    return None;
                }
            }
            let (t, axis) = if t_near > t_min && t_near < t_max {
                (t_near, near_axis)
            } else if t_far > t_min && t_far < t_max {
                (t_far, far_axis)
            } else {
                return None;
            };
            let local_hit = lo[axis] + ld[axis] * t;
            let mut n = [0.0; 3];
            n[axis] = if local_hit >= 0.0 { 1.0 } else { -1.0 };
            Some((t, *rotation * Vec3::from(n)))
        }
    }
}

/// Camera basis and ray generation. Also the frame in which all sample
/// patterns are defined.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CameraFrame {
    pub origin: Vec3,
    /// Columns: right, up, back (`-forward`).
    pub basis: Mat3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    tan_half: f64,
    aspect: f64,
    width: usize,
    height: usize,
    /// Ray offset scaled with the camera distance, so it transforms with
    /// the scene.
    pub eps: f64,
}

impl CameraFrame {
    pub fn new(camera: &Camera) -> Self {
        let forward = (camera.look_at - camera.position).normalized();
        let right = forward.cross(camera.up).normalized();
        let up = right.cross(forward);
        let (w, h) = (camera.width(), camera.height());
        CameraFrame {
            origin: camera.position,
            basis: Mat3::from_columns(right, up, -forward),
            forward,
            right,
            up,
            tan_half: (camera.vertical_fov_deg.to_radians() * 0.5).tan(),
            aspect: w as f64 / h as f64,
            width: w,
            height: h,
            eps: 1e-7 * (camera.look_at - camera.position).length(),
        }
    }

    pub fn ray(&self, px: usize, py: usize) -> Vec3 {
        let u = ((px as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * self.tan_half * self.aspect;
        let v = (1.0 - (py as f64 + 0.5) / self.height as f64 * 2.0) * self.tan_half;
        (self.forward + self.right * u + self.up * v).normalized()
    }

    fn to_world(&self, local: Vec3) -> Vec3 {
        self.basis * local
    }

    fn to_local(&self, world: Vec3) -> Vec3 {
        self.basis.transpose() * world
    }

    /// Orthonormal frame `(t, b, n)` around a world-space unit vector `n`,
    /// built from `n`'s camera-local coordinates so it rotates with the
    /// camera.
    fn tangent_frame(&self, n: Vec3) -> (Vec3, Vec3) {
        let ln = self.to_local(n);
        let helper = if ln.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
        let lt = helper.cross(ln).normalized();
        let lb = ln.cross(lt);
        (self.to_world(lt), self.to_world(lb))
    }
}

/// Stratified 2-D sample `k` of `n`: first coordinate stratified, second
/// uniform.
fn stratified(rng: &mut impl Rng, k: u32, n: u32) -> (f64, f64) {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    ((k as f64 + u) / n as f64, v)
}

fn uniform_sphere(u: f64, v: f64) -> Vec3 {
    let z = 1.0 - 2.0 * u;
    let r = (1.0 - z * z).max(0.0).sqrt();
    let phi = 2.0 * PI * v;
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// Radiant-intensity lobe exponent for an area light: intensity falls to
/// one half at `spread_deg` off-axis. 90° gives an isotropic hemisphere.
pub fn lobe_exponent(spread_deg: f64) -> f64 {
    if spread_deg >= 90.0 {
        0.0
    } else {
        0.5f64.ln() / spread_deg.to_radians().cos().ln()
    }
}

/// Surface radiance of a visible spherical emitter of power `energy`.
pub fn emitter_radiance(energy: f64, radius: f64) -> f64 {
    energy / (4.0 * PI * PI * radius * radius)
}

struct Tracer<'a> {
    scene: &'a Scene,
    frame: CameraFrame,
}

impl<'a> Tracer<'a> {
    fn new(scene: &'a Scene, camera: &Camera) -> Self {
        Tracer {
            scene,
            frame: CameraFrame::new(camera),
        }
    }

    fn primary(&self, px: usize, py: usize) -> (Vec3, Option<Hit>) {
        let dir = self.frame.ray(px, py);
        (dir, intersect(self.scene, self.frame.origin, dir))
    }

    fn shadow_origin(&self, hit: &Hit) -> Vec3 {
        hit.point + hit.normal * self.frame.eps
    }

    /// Mean visibility and radiance from one local light at a surface hit.
    fn local_light(&self, hit: &Hit, light: &LightSpec, rng: &mut impl Rng, n: u32) -> (f64, Vec3) {
        let origin = self.shadow_origin(hit);
        let mut radiance = 0.0;
        let mut visible = 0.0;
        let area = light.kind == LightKind::AreaSpread;
        let (axis, t, b, exponent) = if area {
            let axis = (light.target - light.position).normalized();
            let (t, b) = self.frame.tangent_frame(axis);
            (axis, t, b, lobe_exponent(light.spread_deg))
        } else {
            (Vec3::ZERO, Vec3::ZERO, Vec3::ZERO, 0.0)
        };
        for k in 0..n {
            let (u, v) = stratified(rng, k, n);
            let sample = if area {
                let r = light.radius * u.sqrt();
                let phi = 2.0 * PI * v;
                light.position + t * (r * phi.cos()) + b * (r * phi.sin())
            } else {
                light.position + self.frame.to_world(uniform_sphere(u, v)) * light.radius
            };
            let to_light = sample - origin;
            let dist = to_light.length();
            if dist <= self.frame.eps {
                continue;
            }
            let w = to_light / dist;
            let cos = hit.normal.dot(w);
            if cos <= 0.0 {
                continue;
            }
            let intensity = if area {
                let cos_e = -axis.dot(w);
                if cos_e <= 0.0 {
                    continue;
                }
                light.energy * (exponent + 1.0) / (2.0 * PI) * cos_e.powf(exponent)
            } else {
                light.energy / (4.0 * PI)
            };
            if occluded(self.scene, origin, w, dist - self.frame.eps) {
                continue;
            }
            visible += 1.0;
            radiance += intensity / (dist * dist) * cos / PI;
        }
        (visible / n as f64, hit.albedo.mul_elem(light.color) * (radiance / n as f64))
    }

    /// Distance to a visible spherical emitter along a camera ray.
    fn emitter_t(&self, dir: Vec3, light: &LightSpec) -> Option<f64> {
        if !light.visible || light.kind != LightKind::PointSphere || light.radius <= 0.0 {
            return None;
        }
        let sphere = Primitive::sphere(light.position, light.radius, Vec3::ZERO);
        hit_primitive(&sphere, self.frame.origin, dir, 0.0, f64::INFINITY).map(|(t, _)| t)
    }
}

fn check_inputs(scene: &Scene, camera: &Camera, settings: &RenderSettings) -> Result<()> {
    if let Some(v) = crate::scene::validate_scene(scene).first() {
        return Err(Error::Invalid(v.to_string()));
    }
    camera.validate()?;
    settings.validate()
}

fn render_pixels(camera: &Camera, shade: impl Fn(usize, usize) -> Vec3 + Sync) -> LinearImage {
    let (w, h) = (camera.width(), camera.height());
    let mut img = Image::new(w, h);
    img.data_mut()
        .par_chunks_mut(w * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w {
                let c = shade(x, y);
                row[x * 3] = c.x as f32;
                row[x * 3 + 1] = c.y as f32;
                row[x * 3 + 2] = c.z as f32;
            }
        });
    img
}

/// Radiance contributed by one point or area light, without ambient.
pub fn render_light_component(
    scene: &Scene,
    camera: &Camera,
    light: &LightSpec,
    settings: &RenderSettings,
) -> Result<LinearImage> {
    if light.kind.is_environment() {
        return Err(Error::WrongLightKind {
            operation: "render_light_component",
            kind: light.kind,
        });
    }
    check_inputs(scene, camera, settings)?;
    light.validate()?;
    let tracer = Tracer::new(scene, camera);
    let w = camera.width() as u64;
    let emitted = light.color * emitter_radiance(light.energy, light.radius);
    Ok(render_pixels(camera, |x, y| {
        let (dir, hit) = tracer.primary(x, y);
        if let Some(te) = tracer.emitter_t(dir, light) {
            if hit.is_none_or(|h| te < h.t) {
                return emitted;
            }
        }
        let Some(hit) = hit else { return Vec3::ZERO };
        let mut rng = keyed_rng(settings.seed, Purpose::Light, settings.stream, y as u64 * w + x as u64);
        tracer.local_light(&hit, light, &mut rng, settings.shadow_samples).1
    }))
}

/// Per-pixel mean light visibility `V̄` over the shadow samples (0 for
/// background pixels and for samples facing away from the light).
pub fn render_visibility(
    scene: &Scene,
    camera: &Camera,
    light: &LightSpec,
    settings: &RenderSettings,
) -> Result<Vec<f64>> {
    let img = {
        if light.kind.is_environment() {
            return Err(Error::WrongLightKind {
                operation: "render_visibility",
                kind: light.kind,
            });
        }
        check_inputs(scene, camera, settings)?;
        let tracer = Tracer::new(scene, camera);
        let w = camera.width() as u64;
        render_pixels(camera, |x, y| {
            let (_, hit) = tracer.primary(x, y);
            let Some(hit) = hit else { return Vec3::ZERO };
            let mut rng = keyed_rng(settings.seed, Purpose::Light, settings.stream, y as u64 * w + x as u64);
            Vec3::splat(tracer.local_light(&hit, light, &mut rng, settings.shadow_samples).0)
        })
    };
    Ok(img.data().chunks_exact(3).map(|p| p[0] as f64).collect())
}

/// Environment (ambient) lighting: constant radiance or an env map.
pub fn render_ambient(
    scene: &Scene,
    camera: &Camera,
    ambient: &LightSpec,
    settings: &RenderSettings,
) -> Result<LinearImage> {
    if !ambient.kind.is_environment() {
        return Err(Error::WrongLightKind {
            operation: "render_ambient",
            kind: ambient.kind,
        });
    }
    check_inputs(scene, camera, settings)?;
    ambient.validate()?;
    let tracer = Tracer::new(scene, camera);
    let w = camera.width() as u64;
    let tint = ambient.color * ambient.energy;
    let map = ambient.env.as_deref().filter(|_| ambient.kind == LightKind::EnvMap);
    let texels = match (map, settings.env_estimator) {
        (Some(m), EnvEstimator::TexelQuadrature) => Some(m.nonzero_texels()),
        _ => None,
    };
    let n = settings.env_samples;
    Ok(render_pixels(camera, |x, y| {
        let (_, hit) = tracer.primary(x, y);
        let Some(hit) = hit else { return Vec3::ZERO };
        let origin = tracer.shadow_origin(&hit);
        if let Some(texels) = &texels {
            let mut sum = Vec3::ZERO;
            for t in texels {
                let cos = hit.normal.dot(t.direction);
                if cos > 0.0 && !occluded(scene, origin, t.direction, f64::INFINITY) {
                    sum += t.radiance * (cos * t.solid_angle);
                }
            }
            return hit.albedo.mul_elem(tint).mul_elem(sum) / PI;
        }
        let (t, b) = tracer.frame.tangent_frame(hit.normal);
        let mut rng = keyed_rng(settings.seed, Purpose::Ambient, settings.stream, y as u64 * w + x as u64);
        let mut sum = Vec3::ZERO;
        for k in 0..n {
            let (u, v) = stratified(&mut rng, k, n);
            let r = u.sqrt();
            let phi = 2.0 * PI * v;
            let dir = t * (r * phi.cos()) + b * (r * phi.sin()) + hit.normal * (1.0 - u).max(0.0).sqrt();
            if occluded(scene, origin, dir, f64::INFINITY) {
                continue;
            }
            sum += match map {
                Some(m) => m.lookup(dir),
                None => Vec3::ONE,
            };
        }
        hit.albedo.mul_elem(tint).mul_elem(sum) / n as f64
    }))
}

/// Full render: ambient plus every local light. Light `i` is rendered with
/// `settings.with_stream(i)`, so the result equals the sum of separately
/// rendered components.
pub fn render_full(
    scene: &Scene,
    camera: &Camera,
    lights: &[LightSpec],
    ambient: Option<&LightSpec>,
    settings: &RenderSettings,
) -> Result<LinearImage> {
    let mut total = match ambient {
        Some(a) => render_ambient(scene, camera, a, settings)?,
        None => {
            check_inputs(scene, camera, settings)?;
            Image::new(camera.width(), camera.height())
        }
    };
    for (i, light) in lights.iter().enumerate() {
        let comp = render_light_component(scene, camera, light, &settings.with_stream(i as u64))?;
        total = total.add(&comp)?;
    }
    Ok(total)
}

/// Pixels whose camera ray first hits an object (sphere or box).
pub fn render_object_mask(scene: &Scene, camera: &Camera) -> Result<Mask> {
    camera.validate()?;
    let tracer = Tracer::new(scene, camera);
    let mut mask = Mask::new(camera.width(), camera.height());
    for y in 0..camera.height() {
        for x in 0..camera.width() {
            if let (_, Some(hit)) = tracer.primary(x, y) {
                mask.set(x, y, scene.primitives[hit.primitive].is_object());
            }
        }
    }
    Ok(mask)
}

/// Pixels where a visible light's emitter is seen directly.
pub fn render_emitter_mask(scene: &Scene, camera: &Camera, light: &LightSpec) -> Result<Mask> {
    camera.validate()?;
    let tracer = Tracer::new(scene, camera);
    let mut mask = Mask::new(camera.width(), camera.height());
    for y in 0..camera.height() {
        for x in 0..camera.width() {
            let (dir, hit) = tracer.primary(x, y);
            if let Some(te) = tracer.emitter_t(dir, light) {
                mask.set(x, y, hit.is_none_or(|h| te < h.t));
            }
        }
    }
    Ok(mask)
}
