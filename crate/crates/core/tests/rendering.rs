use std::f64::consts::PI;

use proptest::prelude::*;

use relight::compositor::tonemap_reinhard;
use relight::math::Mat3;
use relight::metrics::{build_trajectories, confusion_matrix, precision_metrics, spearman};
use relight::presets::{regression_primitives, regression_scene, REGRESSION_SCENES};
use relight::render::{render_ambient, render_full, render_light_component, render_object_mask, render_visibility, RenderSettings};
use relight::scene::{Camera, LightSpec, Primitive, Scene, Sim3Placement};
use relight::simlight::{invariance_check, transform_rig, transform_scene, compare_renders, CanonicalRig};
use relight::Vec3;

fn top_down(n: usize) -> Camera {
    Camera {
        position: Vec3::new(0.0, 3.0, 0.0),
        look_at: Vec3::ZERO,
        up: Vec3::Z,
        vertical_fov_deg: 30.0,
        resolution: [n, n],
    }
}

fn floor_scene() -> Scene {
    Scene::new(vec![Primitive::plane(Vec3::ZERO, Vec3::Y, Vec3::ONE)])
}

fn centre(img: &relight::Image) -> f64 {
    let (w, h) = img.dims();
    img.get(w / 2, h / 2)[0] as f64
}

#[test]
fn lambertian_point_light_oracle() {
    let light = LightSpec::point(Vec3::new(0.0, 1.0, 0.0), 4.0 * PI, 0.0);
    let img = render_light_component(&floor_scene(), &top_down(5), &light, &RenderSettings::default()).unwrap();
    let expected = (1.0 / PI) * (4.0 * PI / (4.0 * PI * 1.0)) * 1.0;
    assert!((centre(&img) - expected).abs() < 1e-6, "{}", centre(&img));
}

#[test]
fn inverse_square_law() {
    let settings = RenderSettings::default();
    let near = LightSpec::point(Vec3::new(0.0, 1.0, 0.0), 7.0, 0.0);
    let far = LightSpec::point(Vec3::new(0.0, 2.0, 0.0), 7.0, 0.0);
    let a = render_light_component(&floor_scene(), &top_down(5), &near, &settings).unwrap();
    let b = render_light_component(&floor_scene(), &top_down(5), &far, &settings).unwrap();
    assert!((centre(&b) / centre(&a) - 0.25).abs() < 1e-6);
}

#[test]
fn constant_environment_on_open_plane() {
    let settings = RenderSettings::default();
    let img = render_ambient(&floor_scene(), &top_down(9), &LightSpec::env_constant(1.0), &settings).unwrap();
    let bound = 3.0 / (settings.env_samples as f64).sqrt();
    for &v in img.data() {
        assert!((v as f64 - 1.0).abs() <= bound, "{v}");
    }
}

#[test]
fn full_render_is_ambient_plus_components() {
    let desc = regression_scene("two_spheres", 24, 24).unwrap();
    let scene = desc.scene();
    let settings = RenderSettings::default().with_seed(5);
    let lights = [
        LightSpec::point(Vec3::new(0.5, 0.7, 0.6), 20.0, 0.05),
        LightSpec::point(Vec3::new(-0.6, 0.4, 0.3), 8.0, 0.2),
        LightSpec::area(Vec3::new(0.0, 0.9, 0.2), Vec3::new(0.0, -0.4, 0.0), 12.0, 0.25, 40.0),
    ];
    let ambient = LightSpec::env_constant(0.25);
    let full = render_full(&scene, &desc.camera, &lights, Some(&ambient), &settings).unwrap();
    let mut sum: Vec<f64> = render_ambient(&scene, &desc.camera, &ambient, &settings).unwrap().to_f64();
    for (i, l) in lights.iter().enumerate() {
        let c = render_light_component(&scene, &desc.camera, l, &settings.with_stream(i as u64)).unwrap();
        for (s, v) in sum.iter_mut().zip(c.to_f64()) {
            *s += v;
        }
    }
    for (f, s) in full.to_f64().iter().zip(&sum) {
        assert!((f - s).abs() <= 1e-6 * s.abs().max(1e-12));
    }
}

#[test]
fn union_of_light_sets_superposes() {
    // Radius-0 lights have no sampling noise, so stream assignment drops out.
    let desc = regression_scene("box_occluder", 20, 20).unwrap();
    let scene = desc.scene();
    let settings = RenderSettings::default();
    let a = [LightSpec::point(Vec3::new(0.5, 0.7, 0.6), 20.0, 0.0)];
    let b = [
        LightSpec::point(Vec3::new(-0.5, 0.6, 0.5), 10.0, 0.0),
        LightSpec::point(Vec3::new(0.1, 0.9, -0.4), 5.0, 0.0),
    ];
    let amb = LightSpec::env_constant(0.25);
    let all: Vec<LightSpec> = a.iter().chain(&b).cloned().collect();
    let union = render_full(&scene, &desc.camera, &all, Some(&amb), &settings).unwrap().to_f64();
    let ra = render_full(&scene, &desc.camera, &a, Some(&amb), &settings).unwrap().to_f64();
    let rb = render_full(&scene, &desc.camera, &b, Some(&amb), &settings).unwrap().to_f64();
    let r0 = render_ambient(&scene, &desc.camera, &amb, &settings).unwrap().to_f64();
    for k in 0..union.len() {
        let expect = ra[k] + rb[k] - r0[k];
        assert!((union[k] - expect).abs() <= 1e-6 * expect.abs().max(1e-9), "{k}");
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let desc = regression_scene("corner", 32, 32).unwrap();
    let render = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                render_full(
                    &desc.scene(),
                    &desc.camera,
                    &desc.local_lights(),
                    desc.ambient().unwrap().as_ref(),
                    &RenderSettings::default().with_seed(9),
                )
                .unwrap()
            })
    };
    let one = render(1);
    assert_eq!(one, render(4));
    assert_eq!(one, render(1));
}

#[test]
fn larger_lights_give_wider_penumbrae() {
    let desc = regression_scene("box_occluder", 48, 48).unwrap();
    let scene = desc.scene();
    let settings = RenderSettings {
        shadow_samples: 64,
        ..RenderSettings::default()
    };
    let mut previous = 0;
    for d in [0.0, 0.05, 0.1, 0.2, 0.4] {
        let light = LightSpec::point(Vec3::new(0.2, 0.8, 0.5), 20.0, d);
        let vis = render_visibility(&scene, &desc.camera, &light, &settings).unwrap();
        let partial = vis.iter().filter(|&&v| v > 0.0 && v < 1.0).count();
        assert!(partial >= previous, "d={d}: {partial} < {previous}");
        previous = partial;
    }
    assert!(previous > 0);
}

#[test]
fn worked_placement_is_invariant() {
    let scene = Scene::new(regression_primitives("sphere_on_plane").unwrap());
    let rig = CanonicalRig::new(Camera::canonical(32, 32), relight::presets::default_light());
    let p = Sim3Placement::new(Vec3::ZERO, Vec3::new(5.0, 0.0, 2.0), 3.0, Mat3::rotation(Vec3::Y, 90.0)).unwrap();
    let report = invariance_check(&scene, &rig, &p, &RenderSettings::default()).unwrap();
    assert!(report.max_rel_err <= 1e-4, "{report:?}");
    assert!(report.lit_channels > 0);
}

#[test]
fn linear_energy_law_is_detected() {
    let scene = Scene::new(regression_primitives("sphere_on_plane").unwrap());
    let rig = CanonicalRig::new(Camera::canonical(24, 24), relight::presets::default_light());
    let settings = RenderSettings::default();
    for s in [0.5, 3.0] {
        let p = Sim3Placement::new(Vec3::ZERO, Vec3::new(1.0, -2.0, 0.5), s, Mat3::rotation(Vec3::X, 25.0)).unwrap();
        let (camera, mut light) = transform_rig(&rig, &p);
        light.energy = s * rig.light.energy;
        let reference = render_light_component(&scene, &rig.camera, &rig.light, &settings).unwrap();
        let moved = render_light_component(&transform_scene(&scene, &p), &camera, &light, &settings).unwrap();
        let report = compare_renders(&reference, &moved).unwrap();
        // The moved image is off by a factor 1/s; relative to the larger of
        // the two values that is |1 - 1/s| for s > 1 and |1 - s| for s < 1.
        let expected = if s > 1.0 { 1.0 - 1.0 / s } else { 1.0 - s };
        assert!((report.mean_rel_err - expected).abs() < 1e-3, "s={s}: {}", report.mean_rel_err);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_placements_are_invariant(
        scene_idx in 0usize..5,
        s in prop::sample::select(vec![0.5, 1.0, 3.0]),
        axis in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter("axis", |(x, y, z)| x * x + y * y + z * z > 0.01),
        deg in -180.0..180.0f64,
        t in (-4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64),
    ) {
        let scene = Scene::new(regression_primitives(REGRESSION_SCENES[scene_idx]).unwrap());
        let rig = CanonicalRig::new(Camera::canonical(16, 16), relight::presets::default_light());
        let p = Sim3Placement::new(
            Vec3::ZERO,
            Vec3::new(t.0, t.1, t.2),
            s,
            Mat3::rotation(Vec3::new(axis.0, axis.1, axis.2), deg),
        ).unwrap();
        let report = invariance_check(&scene, &rig, &p, &RenderSettings::default()).unwrap();
        prop_assert!(report.max_rel_err <= 1e-4, "{:?}", report);
    }
}

#[test]
fn ground_truth_confusion_has_zero_diagonal_and_grows_with_distance() {
    let scene = Scene::new(regression_primitives("sphere_on_plane").unwrap());
    let camera = Camera::canonical(16, 16);
    let traj = &build_trajectories()[0];
    let settings = RenderSettings::default();
    let renders = |seed: u64| -> Vec<relight::Image> {
        traj.positions
            .iter()
            .map(|&p| {
                let l = LightSpec::point(p, 20.0, 0.05);
                tonemap_reinhard(&render_light_component(&scene, &camera, &l, &settings.with_seed(seed)).unwrap())
            })
            .collect()
    };
    let mask = render_object_mask(&scene, &camera).unwrap();
    let gt = renders(1);
    let m = confusion_matrix(&gt, &gt, &mask).unwrap();
    assert_eq!(precision_metrics(&m).unwrap().a, 0.0);
    for i in 0..m.n {
        let dist: Vec<f64> = (0..m.n).map(|j| (i as f64 - j as f64).abs()).collect();
        assert!(spearman(&dist, m.row(i)) > 0.0, "row {i}");
    }
    let other = renders(2);
    let noisy = precision_metrics(&confusion_matrix(&gt, &other, &mask).unwrap()).unwrap();
    // Different seeds leave only Monte Carlo noise on the diagonal.
    assert!(noisy.a > 0.0 && noisy.a < noisy.b_w, "{noisy:?}");
}
