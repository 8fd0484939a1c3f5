//! The desk-scale relighting experiment: spatial-light pairs from a few
//! scenes, a trained [`ToyNet`], and its precision along a trajectory.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::compositor::{compose_relit, tonemap_reinhard, Component};
use crate::dataset::{synthesize_pairs, CacheSpec, ComponentCache};
use crate::flowmatch::{copy_baseline, train, Example, LossCurve, SamplerConfig, ToyNet, TrainConfig, DEFAULT_HIDDEN};
use crate::image::DisplayImage;
use crate::math::Vec3;
use crate::metrics::{confusion_matrix, masked_mse, precision_metrics, ConfusionMatrix, PrecisionMetrics, Trajectory};
use crate::presets::regression_primitives;
use crate::render::{render_light_component, RenderSettings};
use crate::rng::{keyed_rng, Purpose};
use crate::scene::{AddLight, Camera, EditMode, LightEdit, LightSpec, Scene};
use crate::tokenizer::TokenEncoders;
use crate::{Error, Result};

/// Scenes used for toy training.
pub const TOY_SCENES: [&str; 4] = ["sphere_on_plane", "box_occluder", "two_spheres", "rotated_box"];

/// Region light positions are drawn from: above the ground, in front of
/// the back of the cube.
pub const LIGHT_REGION: ([f64; 3], [f64; 3]) = ([-0.85, -0.3, -0.8], [0.85, 0.95, 0.95]);

/// `n` light positions from a keyed stream, uniform in [`LIGHT_REGION`].
pub fn random_light_positions(seed: u64, n: usize) -> Vec<Vec3> {
    let mut rng = keyed_rng(seed, Purpose::Synthesis, u64::MAX, 0);
    let (lo, hi) = LIGHT_REGION;
    (0..n)
        .map(|_| Vec3::new(rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2])))
        .collect()
}

/// Cache with the ambient render and one point-light component per
/// position; no fixtures or area lights.
pub fn spatial_cache(scene: &Scene, camera: &Camera, positions: &[Vec3], settings: &RenderSettings) -> Result<ComponentCache> {
    let spec = CacheSpec {
        light_positions: positions.to_vec(),
        fixture_positions: Vec::new(),
        area_positions: Vec::new(),
        ..CacheSpec::default()
    };
    ComponentCache::render(scene, camera, &spec, settings)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub resolution: usize,
    pub scenes: Vec<String>,
    pub light_positions: Vec<Vec3>,
    pub pairs_per_scene: usize,
    pub hidden: usize,
    pub seed: u64,
    #[serde(skip)]
    pub train: TrainConfig,
    #[serde(skip)]
    pub render: RenderSettings,
}

impl ToyConfig {
    pub fn new(light_positions: Vec<Vec3>, seed: u64) -> Self {
        ToyConfig {
            resolution: 16,
            scenes: TOY_SCENES.iter().map(|s| s.to_string()).collect(),
            light_positions,
            pairs_per_scene: 512,
            hidden: DEFAULT_HIDDEN,
            seed,
            train: TrainConfig {
                steps: 5000,
                seed,
                ..TrainConfig::default()
            },
            render: RenderSettings {
                seed,
                ..RenderSettings::default()
            },
        }
    }

    /// Training lights at the even-indexed positions of a trajectory,
    /// leaving the odd-indexed ones held out.
    pub fn on_trajectory(trajectory: &Trajectory, seed: u64) -> Self {
        ToyConfig::new(trajectory.positions.iter().step_by(2).copied().collect(), seed)
    }

    pub fn camera(&self) -> Camera {
        Camera::canonical(self.resolution, self.resolution)
    }

    pub fn scene(&self, name: &str) -> Result<Scene> {
        regression_primitives(name)
            .map(Scene::new)
            .ok_or_else(|| Error::Invalid(format!("unknown scene {name:?}")))
    }
}

/// Trained network plus its loss curve.
pub struct ToyRun {
    pub net: ToyNet,
    pub curve: LossCurve,
    pub examples: usize,
}

/// Renders the caches, synthesizes spatial pairs and trains a network.
pub fn train_toy(cfg: &ToyConfig) -> Result<ToyRun> {
    let camera = cfg.camera();
    let mut net = ToyNet::new(
        EditMode::Spatial,
        cfg.resolution,
        cfg.resolution,
        cfg.hidden,
        TokenEncoders::with_defaults(cfg.seed),
        cfg.seed,
    );
    let mut examples: Vec<Example> = Vec::new();
    for (k, name) in cfg.scenes.iter().enumerate() {
        let cache = spatial_cache(&cfg.scene(name)?, &camera, &cfg.light_positions, &cfg.render)?;
        for pair in synthesize_pairs(&cache, EditMode::Spatial, cfg.pairs_per_scene, cfg.seed ^ (k as u64 + 1))? {
            examples.push(net.example_from_pair(&pair)?);
        }
    }
    let curve = train(&mut net, &examples, &cfg.train)?;
    Ok(ToyRun {
        net,
        curve,
        examples: examples.len(),
    })
}

/// Fixed edit values used along a trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEdit {
    pub ambient_scale: f64,
    pub intensity: f64,
    pub color: Vec3,
}

impl Default for ProbeEdit {
    fn default() -> Self {
        ProbeEdit {
            ambient_scale: 0.6,
            intensity: 0.8,
            color: Vec3::ONE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryReport {
    pub matrix: ConfusionMatrix,
    pub metrics: PrecisionMetrics,
    pub copy_matrix: ConfusionMatrix,
    pub copy_metrics: PrecisionMetrics,
}

/// Ground-truth targets and the shared input image for a trajectory.
pub struct TrajectoryTargets {
    pub input: DisplayImage,
    pub targets: Vec<DisplayImage>,
    pub edits: Vec<LightEdit>,
    pub mask: crate::image::Mask,
}

pub fn trajectory_targets(
    scene: &Scene,
    camera: &Camera,
    trajectory: &Trajectory,
    probe: &ProbeEdit,
    settings: &RenderSettings,
) -> Result<TrajectoryTargets> {
    let env = crate::render::render_ambient(
        scene,
        camera,
        &LightSpec::env_constant(crate::presets::DEFAULT_AMBIENT),
        settings,
    )?;
    let input = tonemap_reinhard(&compose_relit(&env, probe.ambient_scale, &[])?);
    let mut targets = Vec::new();
    let mut edits = Vec::new();
    for (i, &p) in trajectory.positions.iter().enumerate() {
        let light = LightSpec::point(p, crate::presets::DEFAULT_LIGHT_ENERGY, crate::presets::DEFAULT_LIGHT_RADIUS);
        let comp = render_light_component(scene, camera, &light, &settings.with_stream(1000 + i as u64))?;
        targets.push(tonemap_reinhard(&compose_relit(
            &env,
            probe.ambient_scale,
            &[Component::new(&comp, probe.intensity, probe.color)],
        )?));
        edits.push(LightEdit::spatial(
            probe.ambient_scale,
            AddLight {
                position: p,
                color: probe.color,
                intensity: probe.intensity,
                diffuse: light.radius,
            },
        ));
    }
    Ok(TrajectoryTargets {
        input,
        targets,
        edits,
        mask: crate::render::render_object_mask(scene, camera)?,
    })
}

/// Confusion matrices of a predictor and of the copy-input baseline.
pub fn evaluate_trajectory(
    targets: &TrajectoryTargets,
    predict: impl Fn(&DisplayImage, &LightEdit) -> Result<DisplayImage>,
) -> Result<TrajectoryReport> {
    let preds = targets
        .edits
        .iter()
        .map(|e| predict(&targets.input, e))
        .collect::<Result<Vec<_>>>()?;
    let matrix = confusion_matrix(&targets.targets, &preds, &targets.mask)?;
    let copies = vec![copy_baseline(&targets.input); targets.targets.len()];
    let copy_matrix = confusion_matrix(&targets.targets, &copies, &targets.mask)?;
    Ok(TrajectoryReport {
        metrics: precision_metrics(&matrix)?,
        copy_metrics: precision_metrics(&copy_matrix)?,
        matrix,
        copy_matrix,
    })
}

/// Mean masked MSE of the model and of the copy baseline over a set of
/// held-out `(input, target, edit)` triples.
pub fn heldout_mse(net: &ToyNet, targets: &TrajectoryTargets, sampler: &SamplerConfig) -> Result<(f64, f64)> {
    let (mut model, mut copy) = (0.0, 0.0);
    for (t, e) in targets.targets.iter().zip(&targets.edits) {
        let pred = net.relight(&targets.input, e, sampler)?;
        model += masked_mse(&pred, t, &targets.mask)?;
        copy += masked_mse(&copy_baseline(&targets.input), t, &targets.mask)?;
    }
    let n = targets.targets.len() as f64;
    Ok((model / n, copy / n))
}
