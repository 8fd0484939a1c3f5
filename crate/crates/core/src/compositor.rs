//! On-the-fly paired supervision.
//!
//! A relit image is a weighted sum of pre-rendered linear components,
//! tone-mapped afterwards:
//!
//! ```text
//! I_r = T(a·I + Σᵢ λᵢ·cᵢ ⊙ Oᵢ),   T(x) = x / (1 + x)
//! ```
//!
//! The per-pixel sum is taken over the terms sorted by value, so the result
//! does not depend on the order components are listed in, and replaying a
//! pair's recorded parameters reproduces its images bit for bit.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::image::{DisplayImage, Image, LinearImage, Mask};
use crate::math::Vec3;
use crate::scene::{AddLight, EditMode, InSceneLight, LightEdit, LightSpec, MAX_MULTI_LIGHTS};
use crate::{Error, Result};

pub fn reinhard(x: f64) -> f64 {
    x / (1.0 + x)
}

pub fn inverse_reinhard(y: f64) -> f64 {
    y / (1.0 - y)
}

/// Per-channel `x / (1 + x)`.
pub fn tonemap_reinhard(img: &LinearImage) -> DisplayImage {
    img.map(|v| reinhard(v as f64) as f32)
}

/// One weighted term `intensity · color ⊙ image`.
#[derive(Clone, Copy, Debug)]
pub struct Component<'a> {
    pub image: &'a LinearImage,
    pub intensity: f64,
    pub color: Vec3,
}

impl<'a> Component<'a> {
    pub fn new(image: &'a LinearImage, intensity: f64, color: Vec3) -> Self {
        Component {
            image,
            intensity,
            color,
        }
    }

    pub fn white(image: &'a LinearImage, intensity: f64) -> Self {
        Component::new(image, intensity, Vec3::ONE)
    }
}

/// `Σ intensityᵢ · colorᵢ ⊙ imageᵢ`, independent of term order.
pub fn compose_terms(terms: &[Component<'_>]) -> Result<LinearImage> {
    let Some(first) = terms.first() else {
        return Err(Error::Invalid("compose_terms needs at least one term".into()));
    };
    for t in terms {
        first.image.check_same_dims(t.image)?;
    }
    let (w, h) = first.image.dims();
    let mut out = Image::new(w, h);
    let mut buf = Vec::with_capacity(terms.len());
    for (i, px) in out.data_mut().iter_mut().enumerate() {
        let ch = i % 3;
        buf.clear();
        buf.extend(
            terms
                .iter()
                .map(|t| t.intensity * t.color[ch] * t.image.data()[i] as f64),
        );
        buf.sort_by(f64::total_cmp);
        *px = buf.iter().sum::<f64>() as f32;
    }
    Ok(out)
}

/// Pre-tonemap relit image `a·I + Σ λᵢ·cᵢ ⊙ Oᵢ`.
pub fn compose_relit(ambient: &LinearImage, a: f64, components: &[Component<'_>]) -> Result<LinearImage> {
    if a < 0.0 || components.iter().any(|c| c.intensity < 0.0) {
        return Err(Error::Invalid("ambient scale and intensities must be >= 0".into()));
    }
    let mut terms = Vec::with_capacity(components.len() + 1);
    terms.push(Component::white(ambient, a));
    terms.extend_from_slice(components);
    compose_terms(&terms)
}

/// Uniform colour on `[0,1]³`, rescaled so its largest channel is 1.
pub fn sample_color(rng: &mut impl Rng) -> Vec3 {
    let c = Vec3::new(rng.random(), rng.random(), rng.random());
    let m = c.max_component();
    if m > 0.0 {
        c / m
    } else {
        Vec3::ONE
    }
}

/// An in-frame light fixture: its component render and image mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Fixture {
    pub render: LinearImage,
    pub mask: Mask,
}

/// A component render of a light at one spread setting.
#[derive(Clone, Debug, PartialEq)]
pub struct SpreadRender {
    pub light: LightSpec,
    /// Spread normalized to `[0, 1]`.
    pub spread: f64,
    pub image: LinearImage,
}

/// Everything needed to replay a pair from cached components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: EditMode,
    /// Controllable components: selected fixture, chosen lights, or the
    /// input/target spread renders.
    pub component_ids: Vec<usize>,
    /// Non-selected fixtures folded into the ambient image.
    #[serde(default)]
    pub folded_ids: Vec<usize>,
    pub ambient_scale: f64,
    /// Colour applied to the ambient term (diffuse mode only).
    pub ambient_color: Vec3,
    /// Target intensities, one per controllable component.
    pub intensities: Vec<f64>,
    pub colors: Vec<Vec3>,
    /// Fixture intensity in the input image (visible mode).
    #[serde(default)]
    pub input_intensity: Option<f64>,
    #[serde(default)]
    pub global_diffuse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub input: DisplayImage,
    pub target: DisplayImage,
    pub edit: LightEdit,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VisibleParams {
    pub ambient_scale: f64,
    pub input_intensity: f64,
    pub output_intensity: f64,
    pub color: Vec3,
    /// Non-selected fixtures to fold into ambient (at most five).
    pub folded: Vec<usize>,
}

pub const MAX_FOLDED_FIXTURES: usize = 5;

impl VisibleParams {
    pub fn sample(rng: &mut impl Rng, fixtures: usize, selected: usize) -> Self {
        let mut others: Vec<usize> = (0..fixtures).filter(|&i| i != selected).collect();
        // Fisher-Yates, then keep a random-length prefix.
        for i in (1..others.len()).rev() {
            let j = rng.random_range(0..=i);
            others.swap(i, j);
        }
        let keep = rng.random_range(0..=others.len().min(MAX_FOLDED_FIXTURES));
        others.truncate(keep);
        others.sort_unstable();
        VisibleParams {
            ambient_scale: rng.random(),
            input_intensity: rng.random(),
            output_intensity: rng.random(),
            color: sample_color(rng),
            folded: others,
        }
    }
}

fn visible_ambient(env: &LinearImage, fixtures: &[Fixture], folded: &[usize]) -> Result<LinearImage> {
    let mut terms = vec![Component::white(env, 1.0)];
    for &i in folded {
        terms.push(Component::white(&fixtures[i].render, 1.0));
    }
    compose_terms(&terms)
}

/// Visible-fixture pair with explicit parameters.
pub fn synth_visible_pair_with(
    env: &LinearImage,
    fixtures: &[Fixture],
    selected: usize,
    params: &VisibleParams,
) -> Result<TrainingPair> {
    if fixtures.is_empty() {
        return Err(Error::Invalid("visible-fixture synthesis needs at least one fixture".into()));
    }
    if selected >= fixtures.len() {
        return Err(Error::Invalid(format!("selected fixture {selected} out of range")));
    }
    if params.folded.len() > MAX_FOLDED_FIXTURES
        || params.folded.iter().any(|&i| i == selected || i >= fixtures.len())
    {
        return Err(Error::Invalid("folded fixtures must be up to five non-selected indices".into()));
    }
    let ambient = visible_ambient(env, fixtures, &params.folded)?;
    let fixture = &fixtures[selected];
    let a = params.ambient_scale;
    let input = compose_relit(&ambient, a, &[Component::new(&fixture.render, params.input_intensity, params.color)])?;
    let target = compose_relit(&ambient, a, &[Component::new(&fixture.render, params.output_intensity, params.color)])?;
    let edit = LightEdit::visible(
        a,
        InSceneLight {
            mask: fixture.mask.clone(),
            color: params.color,
            intensity: params.output_intensity,
            transition: params.output_intensity < params.input_intensity,
        },
    );
    Ok(TrainingPair {
        input: tonemap_reinhard(&input),
        target: tonemap_reinhard(&target),
        edit,
        provenance: Provenance {
            mode: EditMode::Visible,
            component_ids: vec![selected],
            folded_ids: params.folded.clone(),
            ambient_scale: a,
            ambient_color: Vec3::ONE,
            intensities: vec![params.output_intensity],
            colors: vec![params.color],
            input_intensity: Some(params.input_intensity),
            global_diffuse: 0.0,
        },
    })
}

/// Visible-fixture pair: the selected fixture is the controllable light,
/// the environment plus up to five other fixtures form the ambient image.
pub fn synth_visible_pair(
    env: &LinearImage,
    fixtures: &[Fixture],
    selected: usize,
    rng: &mut impl Rng,
) -> Result<TrainingPair> {
    if fixtures.is_empty() {
        return Err(Error::Invalid("visible-fixture synthesis needs at least one fixture".into()));
    }
    let params = VisibleParams::sample(rng, fixtures.len(), selected);
    synth_visible_pair_with(env, fixtures, selected, &params)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpatialParams {
    pub ambient_scale: f64,
    pub intensity: f64,
    pub color: Vec3,
}

impl SpatialParams {
    pub fn sample(rng: &mut impl Rng) -> Self {
        SpatialParams {
            ambient_scale: rng.random(),
            intensity: rng.random(),
            color: sample_color(rng),
        }
    }
}

pub fn synth_spatial_pair_with(
    env: &LinearImage,
    point_render: &LinearImage,
    light: &LightSpec,
    params: &SpatialParams,
) -> Result<TrainingPair> {
    let a = params.ambient_scale;
    let input = compose_relit(env, a, &[])?;
    let target = compose_relit(env, a, &[Component::new(point_render, params.intensity, params.color)])?;
    let edit = LightEdit::spatial(
        a,
        AddLight {
            position: light.position,
            color: params.color,
            intensity: params.intensity,
            diffuse: light.radius,
        },
    );
    Ok(TrainingPair {
        input: tonemap_reinhard(&input),
        target: tonemap_reinhard(&target),
        edit,
        provenance: Provenance {
            mode: EditMode::Spatial,
            component_ids: vec![0],
            folded_ids: Vec::new(),
            ambient_scale: a,
            ambient_color: Vec3::ONE,
            intensities: vec![params.intensity],
            colors: vec![params.color],
            input_intensity: None,
            global_diffuse: 0.0,
        },
    })
}

/// Added point light: `I = T(a·env)`, `I_r = T(a·env + λ·c ⊙ O)`. The edit
/// records the light's canonical position and radius.
pub fn synth_spatial_pair(
    env: &LinearImage,
    point_render: &LinearImage,
    light: &LightSpec,
    rng: &mut impl Rng,
) -> Result<TrainingPair> {
    synth_spatial_pair_with(env, point_render, light, &SpatialParams::sample(rng))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiffuseParams {
    pub ambient_scale: f64,
    pub ambient_color: Vec3,
    pub intensity: f64,
    pub color: Vec3,
}

impl DiffuseParams {
    pub fn sample(rng: &mut impl Rng) -> Self {
        DiffuseParams {
            ambient_scale: rng.random(),
            ambient_color: sample_color(rng),
            intensity: rng.random(),
            color: sample_color(rng),
        }
    }
}

pub fn synth_diffuse_pair_with(
    ambient: &LinearImage,
    from: &SpreadRender,
    to: &SpreadRender,
    params: &DiffuseParams,
) -> Result<TrainingPair> {
    let (l1, l2) = (&from.light, &to.light);
    if l1.position != l2.position || l1.energy != l2.energy || l1.target != l2.target || l1.kind != l2.kind {
        return Err(Error::Invalid(
            "diffuse pair renders must share light kind, position, target and energy".into(),
        ));
    }
    let amb = Component::new(ambient, params.ambient_scale, params.ambient_color);
    let input = compose_terms(&[amb, Component::new(&from.image, params.intensity, params.color)])?;
    let target = compose_terms(&[amb, Component::new(&to.image, params.intensity, params.color)])?;
    let d_g = to.spread - from.spread;
    Ok(TrainingPair {
        input: tonemap_reinhard(&input),
        target: tonemap_reinhard(&target),
        edit: LightEdit::global(params.ambient_scale, d_g),
        provenance: Provenance {
            mode: EditMode::Diffuse,
            component_ids: vec![0, 1],
            folded_ids: Vec::new(),
            ambient_scale: params.ambient_scale,
            ambient_color: params.ambient_color,
            intensities: vec![params.intensity],
            colors: vec![params.color],
            input_intensity: None,
            global_diffuse: d_g,
        },
    })
}

/// Spread-change pair over a constant-ambient render `ambient`:
/// `I = T(a·c₁A + λ·c₂O₁)`, `I_r = T(a·c₁A + λ·c₂O₂)`, `d_g = d₂ − d₁`.
pub fn synth_diffuse_pair(
    ambient: &LinearImage,
    from: &SpreadRender,
    to: &SpreadRender,
    rng: &mut impl Rng,
) -> Result<TrainingPair> {
    synth_diffuse_pair_with(ambient, from, to, &DiffuseParams::sample(rng))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiParams {
    pub ambient_scale: f64,
    /// Indices of the active lights, in block order.
    pub chosen: Vec<usize>,
    pub intensities: Vec<f64>,
    pub colors: Vec<Vec3>,
}

impl MultiParams {
    pub fn sample(rng: &mut impl Rng, available: usize) -> Self {
        let k = rng.random_range(1..=MAX_MULTI_LIGHTS.min(available));
        let mut pool: Vec<usize> = (0..available).collect();
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            let j = rng.random_range(0..pool.len());
            chosen.push(pool.swap_remove(j));
        }
        let ambient_scale = rng.random();
        let intensities = (0..k).map(|_| rng.random()).collect();
        let colors = (0..k).map(|_| sample_color(rng)).collect();
        MultiParams {
            ambient_scale,
            chosen,
            intensities,
            colors,
        }
    }
}

pub fn synth_multi_pair_with(
    env: &LinearImage,
    lights: &[(LightSpec, LinearImage)],
    params: &MultiParams,
) -> Result<TrainingPair> {
    let k = params.chosen.len();
    if k == 0 || k > MAX_MULTI_LIGHTS || params.intensities.len() != k || params.colors.len() != k {
        return Err(Error::Invalid("multi-light pair needs 1 to 3 consistent light blocks".into()));
    }
    if params.chosen.iter().any(|&i| i >= lights.len()) {
        return Err(Error::Invalid("multi-light index out of range".into()));
    }
    let a = params.ambient_scale;
    let comps: Vec<_> = params
        .chosen
        .iter()
        .zip(&params.intensities)
        .zip(&params.colors)
        .map(|((&i, &l), &c)| Component::new(&lights[i].1, l, c))
        .collect();
    let input = compose_relit(env, a, &[])?;
    let target = compose_relit(env, a, &comps)?;
    let blocks = params
        .chosen
        .iter()
        .zip(&params.intensities)
        .zip(&params.colors)
        .map(|((&i, &l), &c)| AddLight {
            position: lights[i].0.position,
            color: c,
            intensity: l,
            diffuse: lights[i].0.radius,
        })
        .collect();
    Ok(TrainingPair {
        input: tonemap_reinhard(&input),
        target: tonemap_reinhard(&target),
        edit: LightEdit::multi(a, blocks),
        provenance: Provenance {
            mode: EditMode::Multi,
            component_ids: params.chosen.clone(),
            folded_ids: Vec::new(),
            ambient_scale: a,
            ambient_color: Vec3::ONE,
            intensities: params.intensities.clone(),
            colors: params.colors.clone(),
            input_intensity: None,
            global_diffuse: 0.0,
        },
    })
}

/// Up to three added lights summed over the environment render.
pub fn synth_multi_pair(
    env: &LinearImage,
    lights: &[(LightSpec, LinearImage)],
    rng: &mut impl Rng,
) -> Result<TrainingPair> {
    if lights.is_empty() {
        return Err(Error::Invalid("multi-light synthesis needs at least one light render".into()));
    }
    synth_multi_pair_with(env, lights, &MultiParams::sample(rng, lights.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant(v: f32) -> Image {
        Image::filled(4, 3, [v, v, v])
    }

    #[test]
    fn reinhard_values() {
        assert_eq!(reinhard(0.0), 0.0);
        assert_eq!(reinhard(1.0), 0.5);
        assert_eq!(reinhard(3.0), 0.75);
    }

    #[test]
    fn compose_with_no_components_returns_ambient() {
        let img = Image::from_raw(1, 1, vec![0.1, 0.7, 3.3]).unwrap();
        assert_eq!(compose_relit(&img, 1.0, &[]).unwrap(), img);
    }

    #[test]
    fn constant_substitution() {
        let (i, o1, o2) = (constant(0.2), constant(0.3), constant(0.1));
        let out = compose_relit(
            &i,
            0.5,
            &[Component::white(&o1, 1.0), Component::white(&o2, 2.0)],
        )
        .unwrap();
        for &v in out.data() {
            assert!((v as f64 - 0.6).abs() < 1e-6);
        }
        for &v in tonemap_reinhard(&out).data() {
            assert!((v as f64 - 0.375).abs() < 1e-6);
        }
    }

    #[test]
    fn channel_color_masks_contribution() {
        let env = constant(0.4);
        let o = constant(1.0);
        let light = LightSpec::point(Vec3::ZERO, 1.0, 0.2);
        let params = SpatialParams {
            ambient_scale: 0.5,
            intensity: 0.8,
            color: Vec3::X,
        };
        let pair = synth_spatial_pair_with(&env, &o, &light, &params).unwrap();
        for px in pair.input.data().chunks(3).zip(pair.target.data().chunks(3)) {
            assert!(px.1[0] > px.0[0]);
            assert_eq!(px.1[1], px.0[1]);
            assert_eq!(px.1[2], px.0[2]);
        }
    }

    #[test]
    fn visible_endpoints() {
        let env = constant(0.3);
        let fixtures = vec![Fixture {
            render: constant(0.9),
            mask: Mask::new(4, 3),
        }];
        let params = VisibleParams {
            ambient_scale: 0.7,
            input_intensity: 0.0,
            output_intensity: 1.0,
            color: Vec3::ONE,
            folded: vec![],
        };
        let pair = synth_visible_pair_with(&env, &fixtures, 0, &params).unwrap();
        let in_scene = pair.edit.in_scene.as_ref().unwrap();
        assert!(!in_scene.transition, "brightening");
        let ambient_only = tonemap_reinhard(&compose_relit(&env, 0.7, &[]).unwrap());
        assert_eq!(pair.input, ambient_only);

        let same = VisibleParams {
            output_intensity: 0.0,
            ..params
        };
        let pair = synth_visible_pair_with(&env, &fixtures, 0, &same).unwrap();
        assert_eq!(pair.input, pair.target);
    }

    #[test]
    fn visible_requires_fixtures() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(synth_visible_pair(&constant(0.1), &[], 0, &mut rng).is_err());
    }

    fn spread(spread: f64, v: f32) -> SpreadRender {
        SpreadRender {
            light: LightSpec::area(Vec3::Y, Vec3::ZERO, 2.0, 0.3, 45.0),
            spread,
            image: constant(v),
        }
    }

    #[test]
    fn diffuse_pair_arithmetic_and_antisymmetry() {
        let amb = constant(0.5);
        let (lo, hi) = (spread(0.2, 0.4), spread(0.8, 0.1));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let fwd = synth_diffuse_pair(&amb, &lo, &hi, &mut rng).unwrap();
        assert!((fwd.edit.global_diffuse - 0.6).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let back = synth_diffuse_pair(&amb, &hi, &lo, &mut rng).unwrap();
        assert_eq!(back.edit.global_diffuse, -fwd.edit.global_diffuse);
        assert_eq!(back.input, fwd.target);
        assert_eq!(back.target, fwd.input);

        let same = synth_diffuse_pair(&amb, &lo, &lo, &mut rng).unwrap();
        assert_eq!(same.input, same.target);
        assert_eq!(same.edit.global_diffuse, 0.0);
    }

    #[test]
    fn diffuse_rejects_mismatched_lights() {
        let amb = constant(0.5);
        let mut other = spread(0.8, 0.1);
        other.light.position = Vec3::X;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(synth_diffuse_pair(&amb, &spread(0.2, 0.4), &other, &mut rng).is_err());
    }

    #[test]
    fn seeded_synthesis_is_reproducible() {
        let env = constant(0.3);
        let fixtures: Vec<_> = (0..4)
            .map(|i| Fixture {
                render: constant(0.1 * i as f32),
                mask: Mask::new(4, 3),
            })
            .collect();
        let a = synth_visible_pair(&env, &fixtures, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = synth_visible_pair(&env, &fixtures, 2, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert!(a.provenance.folded_ids.len() <= MAX_FOLDED_FIXTURES);
        assert!(!a.provenance.folded_ids.contains(&2));
    }
}
