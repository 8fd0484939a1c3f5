//! Lat-long environment maps and the point-light → emissive-sphere
//! surrogate used to build PanoGT targets.
//!
//! Texel `(row, col)` covers polar angles `θ ∈ [row·π/h, (row+1)·π/h]`
//! measured from `+y` and azimuths `φ ∈ [col·2π/w, (col+1)·2π/w]` measured
//! from `+z` towards `+x`, so a direction is
//! `(sin θ sin φ, cos θ, sin θ cos φ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::image::{Image, LinearImage};
use crate::math::Vec3;
use crate::render::{render_ambient, EnvEstimator, RenderSettings};
use crate::scene::{Camera, LightKind, LightSpec, Scene};
use crate::{Error, Result};

/// Sub-texel rays per axis used when rasterizing the emissive sphere.
pub const DEFAULT_SUPERSAMPLE: usize = 16;
/// Default surrogate sphere radius as a fraction of the light distance.
pub const DEFAULT_RADIUS_FRACTION: f64 = 0.05;

/// Where an env map came from when it is a point-light surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateProvenance {
    /// Uniform emitted radiance `L` of the sphere.
    pub emission: f64,
    pub sphere_radius: f64,
    pub sphere_center: Vec3,
    /// Where the panoramic capture was taken.
    pub capture_center: Vec3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnvMap {
    image: LinearImage,
    pub provenance: Option<SurrogateProvenance>,
}

/// One texel as a directional emitter.
#[derive(Clone, Copy, Debug)]
pub struct Texel {
    pub direction: Vec3,
    pub radiance: Vec3,
    pub solid_angle: f64,
}

pub fn direction_from_angles(theta: f64, phi: f64) -> Vec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vec3::new(st * sp, ct, st * cp)
}

impl EnvMap {
    pub fn new(height: usize) -> Self {
        EnvMap {
            image: Image::new(2 * height, height),
            provenance: None,
        }
    }

    pub fn constant(height: usize, radiance: Vec3) -> Self {
        let rgb = [radiance.x as f32, radiance.y as f32, radiance.z as f32];
        EnvMap {
            image: Image::filled(2 * height, height, rgb),
            provenance: None,
        }
    }

    pub fn from_image(image: LinearImage) -> Result<Self> {
        if image.width() != 2 * image.height() || image.height() == 0 {
            return Err(Error::Invalid(format!(
                "env map must be 2h x h, got {}x{}",
                image.width(),
                image.height()
            )));
        }
        if !image.is_valid_radiance() {
            return Err(Error::Invalid("env map radiance must be finite and >= 0".into()));
        }
        Ok(EnvMap {
            image,
            provenance: None,
        })
    }

    pub fn image(&self) -> &LinearImage {
        &self.image
    }

    pub fn height(&self) -> usize {
        self.image.height()
    }

    pub fn width(&self) -> usize {
        self.image.width()
    }

    /// Nearest-texel radiance for a world direction.
    pub fn lookup(&self, dir: Vec3) -> Vec3 {
        let d = dir.normalized();
        let theta = d.y.clamp(-1.0, 1.0).acos();
        let mut phi = d.x.atan2(d.z);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let (w, h) = (self.width(), self.height());
        let row = ((theta / PI * h as f64) as usize).min(h - 1);
        let col = ((phi / (2.0 * PI) * w as f64) as usize).min(w - 1);
        let [r, g, b] = self.image.get(col, row);
        Vec3::new(r as f64, g as f64, b as f64)
    }

    /// Solid angle of a texel in `row`; the same for every column.
    pub fn texel_solid_angle(&self, row: usize) -> f64 {
        let h = self.height() as f64;
        let t0 = row as f64 * PI / h;
        let t1 = (row + 1) as f64 * PI / h;
        (t0.cos() - t1.cos()) * 2.0 * PI / self.width() as f64
    }

    pub fn texel_direction(&self, row: usize, col: usize) -> Vec3 {
        let theta = (row as f64 + 0.5) * PI / self.height() as f64;
        let phi = (col as f64 + 0.5) * 2.0 * PI / self.width() as f64;
        direction_from_angles(theta, phi)
    }

    /// `∫ L dω` over all directions, per channel.
    pub fn integrated_radiance(&self) -> Vec3 {
        let mut total = Vec3::ZERO;
        for row in 0..self.height() {
            let mut sum = Vec3::ZERO;
            for col in 0..self.width() {
                let [r, g, b] = self.image.get(col, row);
                sum += Vec3::new(r as f64, g as f64, b as f64);
            }
            total += sum * self.texel_solid_angle(row);
        }
        total
    }

    pub fn nonzero_texels(&self) -> Vec<Texel> {
        let mut out = Vec::new();
        for row in 0..self.height() {
            let solid_angle = self.texel_solid_angle(row);
            for col in 0..self.width() {
                let [r, g, b] = self.image.get(col, row);
                if r > 0.0 || g > 0.0 || b > 0.0 {
                    out.push(Texel {
                        direction: self.texel_direction(row, col),
                        radiance: Vec3::new(r as f64, g as f64, b as f64),
                        solid_angle,
                    });
                }
            }
        }
        out
    }
}

/// Uniform radiance of a sphere of radius `r` emitting total power `energy`.
pub fn surrogate_emission(energy: f64, r: f64) -> f64 {
    energy / (4.0 * PI * PI * r * r)
}

/// Replaces a point light by an emissive sphere of radius `r` and captures
/// it in a lat-long map seen from `center`, with
/// [`DEFAULT_SUPERSAMPLE`]² coverage rays per texel.
pub fn pointlight_to_envmap(light: &LightSpec, center: Vec3, r: f64, height: usize) -> Result<EnvMap> {
    pointlight_to_envmap_with(light, center, r, height, DEFAULT_SUPERSAMPLE)
}

/// As [`pointlight_to_envmap`] with `supersample²` equal-solid-angle rays
/// per texel; each texel stores `L·color` times the fraction of rays that
/// hit the sphere. `supersample = 1` is a single ray through the texel
/// centre band.
pub fn pointlight_to_envmap_with(
    light: &LightSpec,
    center: Vec3,
    r: f64,
    height: usize,
    supersample: usize,
) -> Result<EnvMap> {
    if light.kind != LightKind::PointSphere {
        return Err(Error::WrongLightKind {
            operation: "pointlight_to_envmap",
            kind: light.kind,
        });
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Invalid(format!("surrogate radius {r} must be > 0")));
    }
    if height == 0 || supersample == 0 {
        return Err(Error::Invalid("env map height and supersample must be >= 1".into()));
    }
    let to_light = light.position - center;
    let dist = to_light.length();
    if dist == 0.0 {
        return Err(Error::Invalid("capture centre coincides with the light position".into()));
    }
    let emission = surrogate_emission(light.energy, r);
    let axis = to_light / dist;
    // A ray from the centre hits the sphere iff its angle to the axis is
    // below the sphere's angular radius.
    let cos_alpha = if dist > r {
        (1.0 - (r / dist).powi(2)).sqrt()
    } else {
        -1.0
    };
    let mut map = EnvMap::new(height);
    let (w, h) = (map.width(), height);
    let n = supersample;
    let rgb = light.color * emission;
    for row in 0..h {
        let c0 = (row as f64 * PI / h as f64).cos();
        let c1 = ((row + 1) as f64 * PI / h as f64).cos();
        // Skip rows that cannot touch the sphere's cone.
        let band_max = c0.max(c1);
        let band_min = c0.min(c1);
        let axis_theta = axis.y.clamp(-1.0, 1.0).acos();
        let alpha = cos_alpha.clamp(-1.0, 1.0).acos();
        let (lo, hi) = (band_max.acos(), band_min.acos());
        if lo > axis_theta + alpha + 1e-12 || hi < axis_theta - alpha - 1e-12 {
            continue;
        }
        for col in 0..w {
            let mut hits = 0usize;
            for i in 0..n {
                let ct = c0 + (c1 - c0) * (i as f64 + 0.5) / n as f64;
                let theta = ct.clamp(-1.0, 1.0).acos();
                for j in 0..n {
                    let phi = (col as f64 + (j as f64 + 0.5) / n as f64) * 2.0 * PI / w as f64;
                    if direction_from_angles(theta, phi).dot(axis) > cos_alpha {
                        hits += 1;
                    }
                }
            }
            if hits > 0 {
                let f = hits as f64 / (n * n) as f64;
                map.image.set(col, row, [(rgb.x * f) as f32, (rgb.y * f) as f32, (rgb.z * f) as f32]);
            }
        }
    }
    map.provenance = Some(SurrogateProvenance {
        emission,
        sphere_radius: r,
        sphere_center: light.position,
        capture_center: center,
    });
    Ok(map)
}

/// Power of the emissive sphere implied by a surrogate map: the captured
/// radiance is divided by the sphere's exact solid angle from the capture
/// centre and re-emitted as `π·L` over the area `4πr²`.
pub fn recovered_flux(map: &EnvMap) -> Result<Vec3> {
    let prov = map
        .provenance
        .ok_or_else(|| Error::Invalid("env map has no surrogate provenance".into()))?;
    let r = prov.sphere_radius;
    let dist = (prov.sphere_center - prov.capture_center).length();
    if dist <= r {
        return Err(Error::Invalid("capture centre lies inside the emissive sphere".into()));
    }
    let omega = 2.0 * PI * (1.0 - (1.0 - (r / dist).powi(2)).sqrt());
    Ok(map.integrated_radiance() * (PI * 4.0 * PI * r * r / omega))
}

/// Renders the scene lit only by the env map: the PanoGT target. Uses
/// texel quadrature, which is exact for the nearest-texel map and free of
/// Monte Carlo noise.
pub fn render_panogt(
    scene: &Scene,
    camera: &Camera,
    envmap: &EnvMap,
    settings: &RenderSettings,
) -> Result<LinearImage> {
    let light = LightSpec::env_map(std::sync::Arc::new(envmap.clone()), 1.0);
    let settings = RenderSettings {
        env_estimator: EnvEstimator::TexelQuadrature,
        ..*settings
    };
    render_ambient(scene, camera, &light, &settings)
}

/// PanoGT and PointGT for one scene scale.
#[derive(Clone, Debug, PartialEq)]
pub struct GtComparison {
    pub scale: f64,
    pub panogt: LinearImage,
    pub pointgt: LinearImage,
    pub mask: crate::image::Mask,
    /// Masked PSNR between the two, tone-mapped.
    pub psnr: f64,
}

/// Shrinks the scene and camera by `scale` about `center` while the light
/// stays put, then renders the light both as itself (PointGT, a sphere of
/// radius `r`) and as its env-map surrogate captured at `center` (PanoGT).
#[allow(clippy::too_many_arguments)]
pub fn compare_gt_at_scale(
    scene: &Scene,
    camera: &Camera,
    light: &LightSpec,
    center: Vec3,
    r: f64,
    height: usize,
    scale: f64,
    settings: &RenderSettings,
) -> Result<GtComparison> {
    let placement = crate::scene::Sim3Placement::new(center, center, scale, crate::math::Mat3::IDENTITY)?;
    let scene = crate::simlight::transform_scene(scene, &placement);
    let camera = placement.transform_camera(camera);
    let env = pointlight_to_envmap(light, center, r, height)?;
    let panogt = render_panogt(&scene, &camera, &env, settings)?;
    let sphere = LightSpec { radius: r, ..light.clone() };
    let pointgt = crate::render::render_light_component(&scene, &camera, &sphere, settings)?;
    let mask = crate::render::render_object_mask(&scene, &camera)?;
    let psnr = crate::metrics::masked_psnr(
        &crate::compositor::tonemap_reinhard(&panogt),
        &crate::compositor::tonemap_reinhard(&pointgt),
        &mask,
    )?;
    Ok(GtComparison {
        scale,
        panogt,
        pointgt,
        mask,
        psnr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn emission_substitution() {
        assert!((surrogate_emission(4.0 * PI * PI, 1.0) - 1.0).abs() < 1e-15);
        let l1 = surrogate_emission(10.0, 0.3);
        let l2 = surrogate_emission(10.0, 0.6);
        assert!((l1 / l2 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn lookup_returns_the_texel_a_direction_falls_in() {
        let mut img = Image::new(8, 4);
        img.set(5, 1, [1.0, 2.0, 3.0]);
        let map = EnvMap::from_image(img).unwrap();
        let d = map.texel_direction(1, 5);
        assert_eq!(map.lookup(d), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(map.lookup(map.texel_direction(2, 5)), Vec3::ZERO);
    }

    #[test]
    fn texel_solid_angles_cover_the_sphere() {
        let map = EnvMap::new(32);
        let total: f64 = (0..32).map(|r| map.texel_solid_angle(r) * 64.0).sum();
        assert!((total - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn flux_is_conserved_at_height_256() {
        let light = LightSpec::point(Vec3::new(0.5, 0.7, 0.6), 20.0, 0.05);
        let dist = light.position.length();
        for r in [0.05 * dist, 0.1 * dist] {
            let map = pointlight_to_envmap(&light, Vec3::ZERO, r, 256).unwrap();
            let flux = recovered_flux(&map).unwrap();
            assert!((flux.x / 20.0 - 1.0).abs() < 5e-3, "r={r}: {}", flux.x);
        }
    }

    #[test]
    fn integrated_radiance_of_constant_map() {
        let map = EnvMap::constant(32, Vec3::new(1.0, 2.0, 0.5));
        let got = map.integrated_radiance();
        assert!((got.y - 8.0 * PI).abs() < 1e-5);
    }

    #[test]
    fn rejects_wrong_aspect_and_coincident_centre() {
        assert!(EnvMap::from_image(Image::new(4, 4)).is_err());
        let light = LightSpec::point(Vec3::ONE, 1.0, 0.0);
        assert!(pointlight_to_envmap(&light, Vec3::ONE, 0.1, 16).is_err());
        assert!(pointlight_to_envmap(&light, Vec3::ZERO, 0.0, 16).is_err());
    }
}
