//! Component caches, pair synthesis at scale, and the on-disk pair format.
//!
//! A [`ComponentCache`] holds every linear render a scene contributes:
//! the ambient image, point-light components, visible fixtures and area
//! lights at several spreads. Pairs are synthesized from it by weighted
//! sums only, so any number of pairs costs no further rendering, and each
//! pair can be replayed from its stored edit and provenance.

use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compositor::{
    compose_relit, compose_terms, synth_diffuse_pair, synth_multi_pair, synth_spatial_pair, synth_visible_pair,
    tonemap_reinhard, Component, Fixture, Provenance, SpreadRender, TrainingPair,
};
use crate::image::{DisplayImage, LinearImage, Mask};
use crate::io::{read_pfm, write_json, write_pfm, write_png_display};
use crate::math::Vec3;
use crate::render::{render_ambient, render_emitter_mask, render_light_component, render_object_mask, RenderSettings};
use crate::rng::{keyed_rng, Purpose};
use crate::scene::{Camera, EditMode, LightEdit, LightSpec, Scene};
use crate::{Error, Result};

/// Which lights to render into a cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheSpec {
    pub ambient: f64,
    pub light_positions: Vec<Vec3>,
    pub light_energy: f64,
    pub light_radius: f64,
    pub fixture_positions: Vec<Vec3>,
    pub fixture_energy: f64,
    pub fixture_radius: f64,
    pub area_positions: Vec<Vec3>,
    pub area_target: Vec3,
    pub area_energy: f64,
    pub area_radius: f64,
    pub spreads_deg: Vec<f64>,
}

impl Default for CacheSpec {
    fn default() -> Self {
        CacheSpec {
            ambient: crate::presets::DEFAULT_AMBIENT,
            light_positions: vec![
                Vec3::new(0.5, 0.7, 0.6),
                Vec3::new(-0.6, 0.5, 0.5),
                Vec3::new(0.0, 0.9, -0.4),
                Vec3::new(0.7, 0.2, 0.8),
            ],
            light_energy: crate::presets::DEFAULT_LIGHT_ENERGY,
            light_radius: crate::presets::DEFAULT_LIGHT_RADIUS,
            fixture_positions: vec![
                Vec3::new(-0.6, 0.5, -0.5),
                Vec3::new(0.6, 0.45, -0.5),
                Vec3::new(0.0, 0.6, -0.7),
            ],
            fixture_energy: 6.0,
            fixture_radius: 0.15,
            area_positions: vec![Vec3::new(0.4, 0.9, 0.5), Vec3::new(-0.5, 0.8, 0.3)],
            area_target: Vec3::new(0.0, -0.4, 0.0),
            area_energy: 12.0,
            area_radius: 0.25,
            spreads_deg: vec![15.0, 40.0, 65.0, 90.0],
        }
    }
}

/// Spread mapped to `[0, 1]` for the diffuse attribute.
pub fn normalized_spread(spread_deg: f64) -> f64 {
    spread_deg / 90.0
}

/// Cached component renders of one scene.
#[derive(Clone, Debug, PartialEq)]
pub struct ComponentCache {
    pub env: LinearImage,
    pub object_mask: Mask,
    pub lights: Vec<(LightSpec, LinearImage)>,
    pub fixtures: Vec<Fixture>,
    /// One list of spread renders per area-light position.
    pub spreads: Vec<Vec<SpreadRender>>,
}

impl ComponentCache {
    /// Renders every component. Each light gets its own RNG stream.
    pub fn render(scene: &Scene, camera: &Camera, spec: &CacheSpec, settings: &RenderSettings) -> Result<Self> {
        let env = render_ambient(scene, camera, &LightSpec::env_constant(spec.ambient), settings)?;
        let mut stream = 0u64;
        let mut next = || {
            stream += 1;
            settings.with_stream(stream)
        };
        let mut lights = Vec::new();
        for &p in &spec.light_positions {
            let light = LightSpec::point(p, spec.light_energy, spec.light_radius);
            let img = render_light_component(scene, camera, &light, &next())?;
            lights.push((light, img));
        }
        let mut fixtures = Vec::new();
        for &p in &spec.fixture_positions {
            let light = LightSpec::point(p, spec.fixture_energy, spec.fixture_radius).with_visible(true);
            fixtures.push(Fixture {
                render: render_light_component(scene, camera, &light, &next())?,
                mask: render_emitter_mask(scene, camera, &light)?,
            });
        }
        let mut spreads = Vec::new();
        for &p in &spec.area_positions {
            let s = next();
            let mut list = Vec::new();
            for &deg in &spec.spreads_deg {
                let light = LightSpec::area(p, spec.area_target, spec.area_energy, spec.area_radius, deg);
                // Shared stream across spreads keeps the noise correlated.
                list.push(SpreadRender {
                    image: render_light_component(scene, camera, &light, &s)?,
                    light,
                    spread: normalized_spread(deg),
                });
            }
            spreads.push(list);
        }
        Ok(ComponentCache {
            env,
            object_mask: render_object_mask(scene, camera)?,
            lights,
            fixtures,
            spreads,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.env.dims()
    }

    /// Whether `mode` can be synthesized from this cache.
    pub fn supports(&self, mode: EditMode) -> bool {
        match mode {
            EditMode::Spatial | EditMode::Multi => !self.lights.is_empty(),
            EditMode::Visible => !self.fixtures.is_empty(),
            EditMode::Diffuse => self.spreads.iter().any(|s| s.len() >= 2),
        }
    }
}

/// One pair from the stream keyed on `(seed, index)`.
pub fn synthesize_pair(cache: &ComponentCache, mode: EditMode, seed: u64, index: u64) -> Result<TrainingPair> {
    if !cache.supports(mode) {
        return Err(Error::Invalid(format!("cache has no components for {} pairs", mode.name())));
    }
    let mut rng = keyed_rng(seed, Purpose::Synthesis, index, 0);
    match mode {
        EditMode::Spatial => {
            let i = rng.random_range(0..cache.lights.len());
            let mut pair = synth_spatial_pair(&cache.env, &cache.lights[i].1, &cache.lights[i].0, &mut rng)?;
            pair.provenance.component_ids = vec![i];
            Ok(pair)
        }
        EditMode::Visible => {
            let sel = rng.random_range(0..cache.fixtures.len());
            synth_visible_pair(&cache.env, &cache.fixtures, sel, &mut rng)
        }
        EditMode::Diffuse => {
            let groups: Vec<usize> = (0..cache.spreads.len()).filter(|&g| cache.spreads[g].len() >= 2).collect();
            let g = groups[rng.random_range(0..groups.len())];
            let list = &cache.spreads[g];
            let from = rng.random_range(0..list.len());
            let mut to = rng.random_range(0..list.len() - 1);
            if to >= from {
                to += 1;
            }
            let mut pair = synth_diffuse_pair(&cache.env, &list[from], &list[to], &mut rng)?;
            pair.provenance.component_ids = vec![g, from, to];
            Ok(pair)
        }
        EditMode::Multi => synth_multi_pair(&cache.env, &cache.lights, &mut rng),
    }
}

/// `count` pairs with indices `0..count`, synthesized in parallel. The
/// result depends only on the cache, mode and seed.
pub fn synthesize_pairs(cache: &ComponentCache, mode: EditMode, count: usize, seed: u64) -> Result<Vec<TrainingPair>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| synthesize_pair(cache, mode, seed, i))
        .collect()
}

fn missing(what: &str, id: usize) -> Error {
    Error::Invalid(format!("provenance refers to missing {what} {id}"))
}

fn light_image(cache: &ComponentCache, id: usize) -> Result<&LinearImage> {
    cache.lights.get(id).map(|(_, img)| img).ok_or_else(|| missing("light", id))
}

fn fixture_image(cache: &ComponentCache, id: usize) -> Result<&LinearImage> {
    cache.fixtures.get(id).map(|f| &f.render).ok_or_else(|| missing("fixture", id))
}

/// Rebuilds the target image from the cache, taking every controllable
/// value (ambient scale, intensities, colours) from the stored edit and
/// only component indices and the ambient colour from the provenance.
pub fn replay_target(cache: &ComponentCache, edit: &LightEdit, prov: &Provenance) -> Result<DisplayImage> {
    let a = edit.ambient_scale;
    let linear = match edit.mode() {
        EditMode::Spatial => {
            let l = edit.add_light.as_ref().expect("spatial edit");
            let img = light_image(cache, prov.component_ids[0])?;
            compose_relit(&cache.env, a, &[Component::new(img, l.intensity, l.color)])?
        }
        EditMode::Visible => {
            let f = edit.in_scene.as_ref().expect("visible edit");
            let mut amb = vec![Component::white(&cache.env, 1.0)];
            for &i in &prov.folded_ids {
                amb.push(Component::white(fixture_image(cache, i)?, 1.0));
            }
            let ambient = compose_terms(&amb)?;
            let img = fixture_image(cache, prov.component_ids[0])?;
            compose_relit(&ambient, a, &[Component::new(img, f.intensity, f.color)])?
        }
        EditMode::Diffuse => {
            let (g, to) = (prov.component_ids[0], prov.component_ids[2]);
            let list = cache.spreads.get(g).ok_or_else(|| missing("spread group", g))?;
            let to = list.get(to).ok_or_else(|| missing("spread", to))?;
            compose_terms(&[
                Component::new(&cache.env, a, prov.ambient_color),
                Component::new(&to.image, prov.intensities[0], prov.colors[0]),
            ])?
        }
        EditMode::Multi => {
            let mut comps = Vec::new();
            for (block, &id) in edit.multi_lights.iter().zip(&prov.component_ids) {
                comps.push(Component::new(light_image(cache, id)?, block.intensity, block.color));
            }
            compose_relit(&cache.env, a, &comps)?
        }
    };
    Ok(tonemap_reinhard(&linear))
}

/// Sidecar stored next to each pair's images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub edit: LightEdit,
    pub provenance: Provenance,
}

pub fn pair_dir(root: &Path, index: usize) -> PathBuf {
    root.join(format!("pair_{index:05}"))
}

/// Writes `input.pfm`, `target.pfm`, PNG previews and `pair.json`.
pub fn write_pair(root: &Path, index: usize, pair: &TrainingPair) -> Result<Vec<PathBuf>> {
    let dir = pair_dir(root, index);
    std::fs::create_dir_all(&dir)?;
    let files = [
        dir.join("input.pfm"),
        dir.join("target.pfm"),
        dir.join("input.png"),
        dir.join("target.png"),
        dir.join("pair.json"),
    ];
    write_pfm(&files[0], &pair.input)?;
    write_pfm(&files[1], &pair.target)?;
    write_png_display(&files[2], &pair.input)?;
    write_png_display(&files[3], &pair.target)?;
    write_json(
        &files[4],
        &PairRecord {
            index,
            edit: pair.edit.clone(),
            provenance: pair.provenance.clone(),
        },
    )?;
    Ok(files.to_vec())
}

pub fn read_pair(dir: &Path) -> Result<TrainingPair> {
    let record: PairRecord = serde_json::from_str(&std::fs::read_to_string(dir.join("pair.json"))?)?;
    Ok(TrainingPair {
        input: read_pfm(&dir.join("input.pfm"))?,
        target: read_pfm(&dir.join("target.pfm"))?,
        edit: record.edit,
        provenance: record.provenance,
    })
}

/// Every `pair_*` directory under `root`, in index order.
pub fn read_pairs(root: &Path) -> Result<Vec<TrainingPair>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir() && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("pair_")))
        .collect();
    dirs.sort();
    dirs.iter().map(|d| read_pair(d)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::regression_primitives;

    fn small_cache() -> ComponentCache {
        let scene = Scene::new(regression_primitives("sphere_on_plane").unwrap());
        let settings = RenderSettings {
            shadow_samples: 2,
            env_samples: 4,
            ..Default::default()
        };
        ComponentCache::render(&scene, &Camera::canonical(16, 16), &CacheSpec::default(), &settings).unwrap()
    }

    #[test]
    fn replay_is_bit_exact_for_every_mode() {
        let cache = small_cache();
        for mode in [EditMode::Spatial, EditMode::Visible, EditMode::Diffuse, EditMode::Multi] {
            for pair in synthesize_pairs(&cache, mode, 8, 5).unwrap() {
                let replay = replay_target(&cache, &pair.edit, &pair.provenance).unwrap();
                assert_eq!(replay, pair.target, "{}", mode.name());
            }
        }
    }

    #[test]
    fn fixtures_are_seen_by_the_camera() {
        let cache = small_cache();
        assert!(cache.fixtures.iter().all(|f| !f.mask.is_empty()));
    }

    #[test]
    fn pair_directory_round_trip() {
        let cache = small_cache();
        let pairs = synthesize_pairs(&cache, EditMode::Visible, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (i, p) in pairs.iter().enumerate() {
            write_pair(dir.path(), i, p).unwrap();
        }
        assert_eq!(read_pairs(dir.path()).unwrap(), pairs);
    }
}
