//! Built-in regression scenes.
//!
//! Every scene sits in the canonical cube with a ground plane at
//! `y = -0.6`, is seen by the canonical camera and carries a constant
//! ambient light plus one point light.

use crate::math::{Mat3, Vec3};
use crate::scene::{Camera, LightSpec, Primitive, SceneDescription};

pub const REGRESSION_SCENES: [&str; 5] = ["sphere_on_plane", "box_occluder", "two_spheres", "corner", "rotated_box"];

pub const FLOOR_Y: f64 = -0.6;
pub const DEFAULT_LIGHT_POSITION: Vec3 = Vec3::new(0.5, 0.7, 0.6);
pub const DEFAULT_LIGHT_ENERGY: f64 = 20.0;
pub const DEFAULT_LIGHT_RADIUS: f64 = 0.05;
pub const DEFAULT_AMBIENT: f64 = 0.25;

fn floor() -> Primitive {
    Primitive::plane(Vec3::new(0.0, FLOOR_Y, 0.0), Vec3::Y, Vec3::splat(0.7))
}

/// Primitives of a named regression scene.
pub fn regression_primitives(name: &str) -> Option<Vec<Primitive>> {
    let grey = Vec3::splat(0.8);
    let prims = match name {
        "sphere_on_plane" => vec![floor(), Primitive::sphere(Vec3::new(0.0, -0.25, 0.0), 0.35, grey)],
        "box_occluder" => vec![
            floor(),
            Primitive::cuboid(Vec3::new(-0.2, FLOOR_Y, 0.15), Vec3::new(0.2, -0.1, 0.45), Vec3::new(0.6, 0.5, 0.4)),
            Primitive::sphere(Vec3::new(0.0, -0.3, -0.3), 0.3, grey),
        ],
        "two_spheres" => vec![
            floor(),
            Primitive::sphere(Vec3::new(-0.35, -0.3, 0.0), 0.3, Vec3::new(0.9, 0.3, 0.3)),
            Primitive::sphere(Vec3::new(0.35, -0.4, 0.2), 0.2, Vec3::new(0.3, 0.5, 0.9)),
        ],
        "corner" => vec![
            floor(),
            Primitive::plane(Vec3::new(0.0, 0.0, -0.8), Vec3::Z, Vec3::splat(0.6)),
            Primitive::sphere(Vec3::new(0.3, -0.35, -0.2), 0.25, grey),
            Primitive::cuboid(Vec3::new(-0.55, FLOOR_Y, -0.5), Vec3::new(-0.15, -0.2, -0.1), Vec3::new(0.4, 0.7, 0.4)),
        ],
        "rotated_box" => {
            let mut b = Primitive::cuboid(Vec3::new(-0.3, FLOOR_Y, -0.3), Vec3::new(0.3, 0.0, 0.3), Vec3::new(0.7, 0.7, 0.5));
            if let Primitive::Cuboid { rotation, .. } = &mut b {
                *rotation = Mat3::rotation(Vec3::Y, 35.0);
            }
            vec![floor(), b, Primitive::sphere(Vec3::new(0.45, -0.45, 0.35), 0.15, grey)]
        }
        _ => return None,
    };
    Some(prims)
}

/// The default point light of the regression scenes.
pub fn default_light() -> LightSpec {
    LightSpec::point(DEFAULT_LIGHT_POSITION, DEFAULT_LIGHT_ENERGY, DEFAULT_LIGHT_RADIUS)
}

/// A named regression scene with canonical camera, ambient and one light.
pub fn regression_scene(name: &str, width: usize, height: usize) -> Option<SceneDescription> {
    Some(SceneDescription {
        primitives: regression_primitives(name)?,
        camera: Camera::canonical(width, height),
        lights: vec![LightSpec::env_constant(DEFAULT_AMBIENT), default_light()],
    })
}
