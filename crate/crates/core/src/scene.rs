//! Scene description types: analytic primitives, the pinhole camera, light
//! sources, similarity placements and lighting edits.
//!
//! All of these are plain value types. Scenes load from JSON with
//! [`SceneDescription::from_json`], which normalizes plane normals.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::envmap::EnvMap;
use crate::image::Mask;
use crate::math::{Mat3, Vec3};
use crate::{Error, Result};

/// Centre of the canonical light-sampling cube.
pub const CANONICAL_CENTER: Vec3 = Vec3::ZERO;
/// The canonical cube spans `[-1, 1]³`.
pub const CUBE_HALF_EXTENT: f64 = 1.0;
/// Canonical camera position, looking at the cube centre with `+y` up.
pub const CANONICAL_CAMERA_POSITION: Vec3 = Vec3::new(0.0, 0.0, 2.5);
pub const DEFAULT_VERTICAL_FOV_DEG: f64 = 39.6;
/// Upper bound on the ambient scale of an edit.
pub const AMBIENT_SCALE_MAX: f64 = 2.0;
/// Maximum number of light blocks in a multi-light edit.
pub const MAX_MULTI_LIGHTS: usize = 3;

/// One analytic Lambertian primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        center: Vec3,
        radius: f64,
        albedo: Vec3,
    },
    Plane {
        point: Vec3,
        normal: Vec3,
        albedo: Vec3,
    },
    /// Box given by `min`/`max` corners in its own frame. The frame is
    /// rotated by `rotation` about the box centre; the default identity
    /// rotation makes it axis-aligned.
    #[serde(rename = "box")]
    Cuboid {
        min: Vec3,
        max: Vec3,
        albedo: Vec3,
        #[serde(default, skip_serializing_if = "is_identity")]
        rotation: Mat3,
    },
}

fn is_identity(m: &Mat3) -> bool {
    *m == Mat3::IDENTITY
}

impl Primitive {
    pub fn sphere(center: Vec3, radius: f64, albedo: Vec3) -> Self {
        Primitive::Sphere {
            center,
            radius,
            albedo,
        }
    }

    pub fn plane(point: Vec3, normal: Vec3, albedo: Vec3) -> Self {
        Primitive::Plane {
            point,
            normal: normal.normalized(),
            albedo,
        }
    }

    pub fn cuboid(min: Vec3, max: Vec3, albedo: Vec3) -> Self {
        Primitive::Cuboid {
            min,
            max,
            albedo,
            rotation: Mat3::IDENTITY,
        }
    }

    pub fn albedo(&self) -> Vec3 {
        match self {
            Primitive::Sphere { albedo, .. }
            | Primitive::Plane { albedo, .. }
            | Primitive::Cuboid { albedo, .. } => *albedo,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Primitive::Sphere { .. } => "sphere",
            Primitive::Plane { .. } => "plane",
            Primitive::Cuboid { .. } => "box",
        }
    }

    /// Spheres and boxes are objects; planes are backdrop (ground, walls).
    pub fn is_object(&self) -> bool {
        !matches!(self, Primitive::Plane { .. })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
}

impl Scene {
    pub fn new(primitives: Vec<Primitive>) -> Self {
        Scene { primitives }
    }

    /// Rescales non-zero plane normals to unit length.
    pub fn normalize(&mut self) {
        for p in &mut self.primitives {
            if let Primitive::Plane { normal, .. } = p {
                if normal.length() > 0.0 {
                    *normal = normal.normalized();
                }
            }
        }
    }
}

/// A broken invariant found by [`validate_scene`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub primitive: usize,
    pub kind: &'static str,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "primitive {} ({}): {}", self.primitive, self.kind, self.rule)
    }
}

fn albedo_in_range(a: Vec3) -> bool {
    a.to_array().iter().all(|c| (0.0..=1.0).contains(c))
}

/// Lists every primitive whose invariants do not hold. Empty means valid.
pub fn validate_scene(scene: &Scene) -> Vec<Violation> {
    let mut out = Vec::new();
    for (i, p) in scene.primitives.iter().enumerate() {
        let mut flag = |rule| {
            out.push(Violation {
                primitive: i,
                kind: p.kind_name(),
                rule,
            })
        };
        if !albedo_in_range(p.albedo()) {
            flag("albedo in [0,1]");
        }
        match p {
            Primitive::Sphere { center, radius, .. } => {
                if !center.is_finite() {
                    flag("center finite");
                }
                if !(*radius > 0.0) {
                    flag("radius > 0");
                }
            }
            Primitive::Plane { point, normal, .. } => {
                if !point.is_finite() {
                    flag("point finite");
                }
                if !((normal.length() - 1.0).abs() < 1e-9) {
                    flag("normal unit length");
                }
            }
            Primitive::Cuboid {
                min, max, rotation, ..
            } => {
                if !(min.x < max.x && min.y < max.y && min.z < max.z) {
                    flag("min < max componentwise");
                }
                if rotation.orthonormality_error() > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9
                {
                    flag("rotation orthonormal with det +1");
                }
            }
        }
    }
    out
}

/// Pinhole camera.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    #[serde(default = "default_fov")]
    pub vertical_fov_deg: f64,
    /// `[width, height]` in pixels.
    pub resolution: [usize; 2],
}

fn default_fov() -> f64 {
    DEFAULT_VERTICAL_FOV_DEG
}

impl Camera {
    /// The canonical rig camera at the given resolution.
    pub fn canonical(width: usize, height: usize) -> Self {
        Camera {
            position: CANONICAL_CAMERA_POSITION,
            look_at: CANONICAL_CENTER,
            up: Vec3::Y,
            vertical_fov_deg: DEFAULT_VERTICAL_FOV_DEG,
            resolution: [width, height],
        }
    }

    pub fn width(&self) -> usize {
        self.resolution[0]
    }

    pub fn height(&self) -> usize {
        self.resolution[1]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position - self.look_at).length().is_normal() {
            return Err(Error::Invalid("camera position equals look_at".into()));
        }
        if !(self.vertical_fov_deg > 0.0 && self.vertical_fov_deg < 180.0) {
            return Err(Error::Invalid(format!(
                "vertical_fov_deg {} outside (0, 180)",
                self.vertical_fov_deg
            )));
        }
        if self.resolution[0] == 0 || self.resolution[1] == 0 {
            return Err(Error::Invalid("camera resolution must be non-zero".into()));
        }
        let forward = self.look_at - self.position;
        if forward.cross(self.up).length() < 1e-12 * forward.length() * self.up.length() {
            return Err(Error::Invalid("camera up is parallel to view direction".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightKind {
    /// Spherical light of radius `radius`; `radius = 0` is a point light.
    PointSphere,
    /// Disk emitter facing `target` with a cosine lobe set by `spread_deg`.
    AreaSpread,
    /// Constant environment radiance `energy · color`.
    EnvConstant,
    /// Lat-long environment map, scaled by `energy · color`.
    EnvMap,
}

impl LightKind {
    pub fn is_environment(self) -> bool {
        matches!(self, LightKind::EnvConstant | LightKind::EnvMap)
    }
}

/// A light source. Field meaning depends on [`LightKind`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightSpec {
    pub kind: LightKind,
    #[serde(default)]
    pub position: Vec3,
    /// Total emitted power for local lights; radiance scale for
    /// environment lights.
    pub energy: f64,
    #[serde(default)]
    pub radius: f64,
    #[serde(default = "default_spread")]
    pub spread_deg: f64,
    #[serde(default = "default_color")]
    pub color: Vec3,
    /// Point an area light faces.
    #[serde(default)]
    pub target: Vec3,
    /// When set, camera rays that reach the emitter see its surface
    /// radiance. Used for in-frame fixtures.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub visible: bool,
    /// PFM file backing an `env_map` light, resolved relative to the
    /// scene file on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env_map: Option<String>,
    #[serde(skip)]
    pub env: Option<Arc<EnvMap>>,
}

fn default_spread() -> f64 {
    90.0
}

fn default_color() -> Vec3 {
    Vec3::ONE
}

impl LightSpec {
    pub fn point(position: Vec3, energy: f64, radius: f64) -> Self {
        LightSpec {
            kind: LightKind::PointSphere,
            position,
            energy,
            radius,
            spread_deg: default_spread(),
            color: Vec3::ONE,
            target: Vec3::ZERO,
            visible: false,
            env_map: None,
            env: None,
        }
    }

    pub fn area(position: Vec3, target: Vec3, energy: f64, radius: f64, spread_deg: f64) -> Self {
        LightSpec {
            kind: LightKind::AreaSpread,
            target,
            spread_deg,
            ..LightSpec::point(position, energy, radius)
        }
    }

    pub fn env_constant(radiance: f64) -> Self {
        LightSpec {
            kind: LightKind::EnvConstant,
            ..LightSpec::point(Vec3::ZERO, radiance, 0.0)
        }
    }

    pub fn env_map(map: Arc<EnvMap>, scale: f64) -> Self {
        LightSpec {
            kind: LightKind::EnvMap,
            env: Some(map),
            ..LightSpec::point(Vec3::ZERO, scale, 0.0)
        }
    }

    pub fn with_color(mut self, color: Vec3) -> Self {
        self.color = color;
        self
    }

    pub fn with_visible(mut self, visible: bool) -> Self {
        self.visible = visible;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.energy >= 0.0 && self.energy.is_finite()) {
            return Err(Error::Invalid(format!("light energy {} must be >= 0", self.energy)));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(Error::Invalid(format!("light radius {} must be >= 0", self.radius)));
        }
        if self.kind == LightKind::AreaSpread && !(self.spread_deg > 0.0 && self.spread_deg <= 90.0)
        {
            return Err(Error::Invalid(format!(
                "spread_deg {} outside (0, 90]",
                self.spread_deg
            )));
        }
        if !albedo_in_range(self.color) {
            return Err(Error::Invalid("light color outside [0,1]".into()));
        }
        if self.kind == LightKind::EnvMap && self.env.is_none() {
            return Err(Error::Invalid("env_map light has no map loaded".into()));
        }
        Ok(())
    }
}

/// Similarity transform placing the canonical cube in the world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sim3Placement {
    pub canonical_center: Vec3,
    pub target_center: Vec3,
    pub scale: f64,
    pub rotation: Mat3,
}

impl Sim3Placement {
    pub fn new(canonical_center: Vec3, target_center: Vec3, scale: f64, rotation: Mat3) -> Result<Self> {
        let p = Sim3Placement {
            canonical_center,
            target_center,
            scale,
            rotation,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        Sim3Placement {
            canonical_center: CANONICAL_CENTER,
            target_center: CANONICAL_CENTER,
            scale: 1.0,
            rotation: Mat3::IDENTITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Invalid(format!("placement scale {} must be > 0", self.scale)));
        }
        if self.rotation.orthonormality_error() > 1e-9 {
            return Err(Error::Invalid("placement rotation is not orthonormal".into()));
        }
        if (self.rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid("placement rotation has det != 1".into()));
        }
        Ok(())
    }
}

/// Which token layout an edit uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditMode {
    /// Added point light: `a`, `λ`, `d`, `p`, `c`.
    Spatial,
    /// In-scene fixture: `a`, `t`, `λ`, `c`, mask.
    Visible,
    /// Global edit: `a`, `d_g`.
    Diffuse,
    /// Up to three added lights, fixed block count.
    Multi,
}

impl EditMode {
    pub fn name(self) -> &'static str {
        match self {
            EditMode::Spatial => "spatial",
            EditMode::Visible => "visible",
            EditMode::Diffuse => "diffuse",
            EditMode::Multi => "multi",
        }
    }
}

impl std::str::FromStr for EditMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spatial" => Ok(EditMode::Spatial),
            "visible" => Ok(EditMode::Visible),
            "diffuse" => Ok(EditMode::Diffuse),
            "multi" => Ok(EditMode::Multi),
            other => Err(Error::Invalid(format!("unknown edit mode {other:?}"))),
        }
    }
}

/// An added light in canonical coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AddLight {
    /// Position inside the canonical cube.
    pub position: Vec3,
    pub color: Vec3,
    /// Intensity `λ ∈ [0, 1]`.
    pub intensity: f64,
    /// Diffuse level `d ∈ [0, 1]` (light radius in canonical units).
    pub diffuse: f64,
}

/// Edit of a fixture visible in the image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InSceneLight {
    pub mask: Mask,
    pub color: Vec3,
    pub intensity: f64,
    /// `true` when the fixture dims, `false` when it brightens.
    pub transition: bool,
}

/// A lighting edit ΔL.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LightEdit {
    pub ambient_scale: f64,
    #[serde(default)]
    pub global_diffuse: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub add_light: Option<AddLight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_scene: Option<InSceneLight>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub multi_lights: Vec<AddLight>,
}

impl LightEdit {
    /// Ambient/diffuse-only edit.
    pub fn global(ambient_scale: f64, global_diffuse: f64) -> Self {
        LightEdit {
            ambient_scale,
            global_diffuse,
            add_light: None,
            in_scene: None,
            multi_lights: Vec::new(),
        }
    }

    pub fn spatial(ambient_scale: f64, light: AddLight) -> Self {
        LightEdit {
            add_light: Some(light),
            ..LightEdit::global(ambient_scale, 0.0)
        }
    }

    pub fn visible(ambient_scale: f64, light: InSceneLight) -> Self {
        LightEdit {
            in_scene: Some(light),
            ..LightEdit::global(ambient_scale, 0.0)
        }
    }

    pub fn multi(ambient_scale: f64, lights: Vec<AddLight>) -> Self {
        LightEdit {
            multi_lights: lights,
            ..LightEdit::global(ambient_scale, 0.0)
        }
    }

    pub fn mode(&self) -> EditMode {
        if self.add_light.is_some() {
            EditMode::Spatial
        } else if self.in_scene.is_some() {
            EditMode::Visible
        } else if !self.multi_lights.is_empty() {
            EditMode::Multi
        } else {
            EditMode::Diffuse
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if !(0.0..=AMBIENT_SCALE_MAX).contains(&self.ambient_scale) {
            return bad(format!("ambient_scale {} outside [0, {AMBIENT_SCALE_MAX}]", self.ambient_scale));
        }
        if !(-1.0..=1.0).contains(&self.global_diffuse) {
            return bad(format!("global_diffuse {} outside [-1, 1]", self.global_diffuse));
        }
        let active = [
            self.add_light.is_some(),
            self.in_scene.is_some(),
            !self.multi_lights.is_empty(),
        ];
        if active.iter().filter(|a| **a).count() > 1 {
            return bad("at most one of add_light, in_scene, multi_lights may be set".into());
        }
        if self.multi_lights.len() > MAX_MULTI_LIGHTS {
            return bad(format!("{} multi lights exceed the limit of {MAX_MULTI_LIGHTS}", self.multi_lights.len()));
        }
        for l in self.add_light.iter().chain(&self.multi_lights) {
            if l.position.to_array().iter().any(|c| c.abs() > CUBE_HALF_EXTENT) {
                return bad(format!("light position {:?} outside the canonical cube", l.position));
            }
            if !albedo_in_range(l.color) {
                return bad("light color outside [0,1]".into());
            }
            if !(0.0..=1.0).contains(&l.intensity) || !(0.0..=1.0).contains(&l.diffuse) {
                return bad("light intensity and diffuse must lie in [0,1]".into());
            }
        }
        if let Some(f) = &self.in_scene {
            if !albedo_in_range(f.color) {
                return bad("fixture color outside [0,1]".into());
            }
            if !(f.intensity >= 0.0 && f.intensity.is_finite()) {
                return bad("fixture intensity must be >= 0".into());
            }
        }
        Ok(())
    }
}

/// Contents of a scene JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub primitives: Vec<Primitive>,
    pub camera: Camera,
    #[serde(default)]
    pub lights: Vec<LightSpec>,
}

impl SceneDescription {
    /// Parses a scene and normalizes plane normals. Env-map lights keep
    /// their path but no pixels; see [`SceneDescription::load`].
    pub fn from_json(text: &str) -> Result<Self> {
        let mut desc: SceneDescription = serde_json::from_str(text)?;
        desc.normalize();
        Ok(desc)
    }

    /// Reads a scene file and loads any env-map PFMs it references.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut desc = SceneDescription::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for light in &mut desc.lights {
            if let Some(rel) = &light.env_map {
                let img = crate::io::read_pfm(&base.join(rel))?;
                light.env = Some(Arc::new(EnvMap::from_image(img)?));
            }
        }
        Ok(desc)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn normalize(&mut self) {
        let mut scene = Scene::new(std::mem::take(&mut self.primitives));
        scene.normalize();
        self.primitives = scene.primitives;
    }

    pub fn scene(&self) -> Scene {
        Scene::new(self.primitives.clone())
    }

    /// Local (point / area) lights in file order.
    pub fn local_lights(&self) -> Vec<LightSpec> {
        self.lights.iter().filter(|l| !l.kind.is_environment()).cloned().collect()
    }

    /// The single environment light, if any. More than one is an error.
    pub fn ambient(&self) -> Result<Option<LightSpec>> {
        let mut env = self.lights.iter().filter(|l| l.kind.is_environment());
        let first = env.next().cloned();
        if env.next().is_some() {
            return Err(Error::Invalid("scene declares more than one environment light".into()));
        }
        Ok(first)
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_scene(&self.scene());
        if let Some(v) = violations.first() {
            return Err(Error::Invalid(v.to_string()));
        }
        self.camera.validate()?;
        for l in &self.lights {
            l.validate()?;
        }
        Ok(())
    }
}
