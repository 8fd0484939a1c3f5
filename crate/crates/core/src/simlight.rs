//! Scene-agnostic camera and light placement.
//!
//! Lights and the camera live in a canonical frame around the cube
//! `[-1, 1]³`. A [`Sim3Placement`] moves the whole rig into the world:
//!
//! ```text
//! p_t   = p + (C_t − C)
//! p_ts  = C_t + s·(p_t − C_t)
//! p_tsr = C_t + R·(p_ts − C_t)
//! E' = s²·E        d' = s·d
//! ```
//!
//! Energy grows with `s²` to cancel the inverse-square falloff and the
//! radius grows with `s` to keep the light's angular size, so a scene
//! transformed by the same placement renders identically.

use serde::{Deserialize, Serialize};

use crate::image::LinearImage;
use crate::math::{Mat3, Vec3};
use crate::render::{render_light_component, RenderSettings};
use crate::scene::{Camera, LightSpec, Primitive, Scene, Sim3Placement};
use crate::Result;

/// Camera and light expressed in canonical coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CanonicalRig {
    pub camera: Camera,
    pub light: LightSpec,
}

impl CanonicalRig {
    pub fn new(camera: Camera, light: LightSpec) -> Self {
        CanonicalRig { camera, light }
    }
}

impl Sim3Placement {
    /// Maps a point through translation, scaling and rotation, in that order.
    pub fn apply_point(&self, p: Vec3) -> Vec3 {
        let translated = p + (self.target_center - self.canonical_center);
        let scaled = self.target_center + (translated - self.target_center) * self.scale;
        self.target_center + self.rotation * (scaled - self.target_center)
    }

    pub fn apply_direction(&self, d: Vec3) -> Vec3 {
        self.rotation * d
    }

    /// The placement equivalent to applying `self` and then `next`, where
    /// `next` treats `self`'s output as its canonical frame.
    pub fn then(&self, next: &Sim3Placement) -> Sim3Placement {
        Sim3Placement {
            canonical_center: self.canonical_center,
            target_center: next.apply_point(self.target_center),
            scale: self.scale * next.scale,
            rotation: next.rotation * self.rotation,
        }
    }

    pub fn transform_camera(&self, camera: &Camera) -> Camera {
        Camera {
            position: self.apply_point(camera.position),
            look_at: self.apply_point(camera.look_at),
            up: self.apply_direction(camera.up),
            ..camera.clone()
        }
    }

    pub fn transform_light(&self, light: &LightSpec) -> LightSpec {
        LightSpec {
            position: self.apply_point(light.position),
            target: self.apply_point(light.target),
            energy: self.scale * self.scale * light.energy,
            radius: self.scale * light.radius,
            ..light.clone()
        }
    }

    pub fn transform_primitive(&self, prim: &Primitive) -> Primitive {
        let s = self.scale;
        match prim {
            Primitive::Sphere {
                center,
                radius,
                albedo,
            } => Primitive::Sphere {
                center: self.apply_point(*center),
                radius: radius * s,
                albedo: *albedo,
            },
            Primitive::Plane {
                point,
                normal,
                albedo,
            } => Primitive::Plane {
                point: self.apply_point(*point),
                normal: self.apply_direction(*normal),
                albedo: *albedo,
            },
            Primitive::Cuboid {
                min,
                max,
                albedo,
                rotation,
            } => {
                let center = self.apply_point((*min + *max) * 0.5);
                let half = (*max - *min) * (0.5 * s);
                Primitive::Cuboid {
                    min: center - half,
                    max: center + half,
                    albedo: *albedo,
                    rotation: self.rotation * *rotation,
                }
            }
        }
    }
}

/// World camera and light for a canonical rig under `placement`.
pub fn transform_rig(rig: &CanonicalRig, placement: &Sim3Placement) -> (Camera, LightSpec) {
    (placement.transform_camera(&rig.camera), placement.transform_light(&rig.light))
}

/// Applies the placement to every primitive.
pub fn transform_scene(scene: &Scene, placement: &Sim3Placement) -> Scene {
    Scene::new(scene.primitives.iter().map(|p| placement.transform_primitive(p)).collect())
}

/// Pixelwise relative error between two renders.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    pub max_rel_err: f64,
    /// Mean over lit channels (either value above the floor).
    pub mean_rel_err: f64,
    pub lit_channels: usize,
}

/// Values at or below this are treated as unlit.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

pub fn compare_renders(a: &LinearImage, b: &LinearImage) -> Result<InvarianceReport> {
    a.check_same_dims(b)?;
    let mut max: f64 = 0.0;
    let mut sum = 0.0;
    let mut lit = 0usize;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (x, y) = (x as f64, y as f64);
        let denom = x.abs().max(y.abs());
        if denom <= RELATIVE_ERROR_FLOOR {
            continue;
        }
        let rel = (x - y).abs() / denom;
        max = max.max(rel);
        sum += rel;
        lit += 1;
    }
    Ok(InvarianceReport {
        max_rel_err: max,
        mean_rel_err: if lit > 0 { sum / lit as f64 } else { 0.0 },
        lit_channels: lit,
    })
}

/// Renders the canonical rig against `scene` and the transformed rig
/// against the transformed scene, and compares the two images.
pub fn invariance_check(
    scene: &Scene,
    rig: &CanonicalRig,
    placement: &Sim3Placement,
    settings: &RenderSettings,
) -> Result<InvarianceReport> {
    placement.validate()?;
    let reference = render_light_component(scene, &rig.camera, &rig.light, settings)?;
    let (camera, light) = transform_rig(rig, placement);
    let moved = render_light_component(&transform_scene(scene, placement), &camera, &light, settings)?;
    compare_renders(&reference, &moved)
}

/// Placement from the CLI-style description: rotation `axis,deg`, then
/// scale and translation of the cube centre.
pub fn placement_from_parts(scale: f64, axis: Vec3, degrees: f64, translate: Vec3) -> Result<Sim3Placement> {
    Sim3Placement::new(
        crate::scene::CANONICAL_CENTER,
        crate::scene::CANONICAL_CENTER + translate,
        scale,
        Mat3::rotation(axis, degrees),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rig() -> CanonicalRig {
        CanonicalRig::new(
            Camera::canonical(8, 8),
            LightSpec::point(Vec3::new(0.5, 0.7, -0.2), 3.0, 0.1),
        )
    }

    #[test]
    fn identity_placement_changes_nothing() {
        let (cam, light) = transform_rig(&rig(), &Sim3Placement::identity());
        assert_eq!(cam, rig().camera);
        assert_eq!(light, rig().light);
    }

    #[test]
    fn translation_then_scaling_substitution() {
        let p = Sim3Placement::new(Vec3::ZERO, Vec3::X, 2.0, Mat3::IDENTITY).unwrap();
        assert_eq!(p.apply_point(Vec3::new(0.5, 0.0, 0.0)), Vec3::new(2.0, 0.0, 0.0));
    }

    #[test]
    fn energy_and_radius_laws() {
        let p = Sim3Placement::new(Vec3::ZERO, Vec3::ZERO, 2.0, Mat3::IDENTITY).unwrap();
        let (_, light) = transform_rig(&rig(), &p);
        assert_eq!(light.energy, 4.0 * rig().light.energy);
        assert_eq!(light.radius, 2.0 * rig().light.radius);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let p1 = Sim3Placement::new(Vec3::ZERO, Vec3::new(1.0, -2.0, 0.5), 0.5, Mat3::rotation(Vec3::Y, 30.0)).unwrap();
        let p2 = Sim3Placement::new(Vec3::new(0.2, 0.0, 0.0), Vec3::new(-3.0, 1.0, 4.0), 3.0, Mat3::rotation(Vec3::new(1.0, 1.0, 0.0), -75.0)).unwrap();
        let both = p1.then(&p2);
        let pt = Vec3::new(0.3, -0.8, 0.9);
        assert!((p2.apply_point(p1.apply_point(pt)) - both.apply_point(pt)).length() < 1e-9);
    }

    #[test]
    fn wrong_energy_ratio_statistic() {
        let a = crate::image::Image::filled(2, 1, [3.0, 3.0, 0.0]);
        let b = a.scaled(1.0 / 3.0);
        let r = compare_renders(&a, &b).unwrap();
        assert_eq!(r.lit_channels, 4);
        assert!((r.mean_rel_err - 2.0 / 3.0).abs() < 1e-7);
    }
}
