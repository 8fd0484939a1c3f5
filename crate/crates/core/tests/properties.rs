use proptest::prelude::*;

use relight::compositor::{compose_relit, compose_terms, inverse_reinhard, reinhard, Component};
use relight::io::{decode_pfm, encode_pfm};
use relight::math::Mat3;
use relight::metrics::{precision_metrics, ConfusionMatrix};
use relight::scene::{AddLight, Camera, EditMode, LightEdit, LightSpec, Primitive, SceneDescription, Sim3Placement};
use relight::simlight::{transform_rig, CanonicalRig};
use relight::tokenizer::{drop_for_cfg, encode_edit, fourier_encode, sequence_len, TokenEncoders};
use relight::{Image, Vec3};

fn vec3(lo: f64, hi: f64) -> impl Strategy<Value = Vec3> {
    (lo..hi, lo..hi, lo..hi).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit_axis() -> impl Strategy<Value = Vec3> {
    vec3(-1.0, 1.0).prop_filter("non-zero axis", |v| v.length() > 0.1)
}

fn placement() -> impl Strategy<Value = Sim3Placement> {
    (vec3(-1.0, 1.0), vec3(-5.0, 5.0), 0.2..4.0f64, unit_axis(), -180.0..180.0f64)
        .prop_map(|(c, t, s, axis, deg)| Sim3Placement::new(c, t, s, Mat3::rotation(axis, deg)).unwrap())
}

fn primitive() -> impl Strategy<Value = Primitive> {
    prop_oneof![
        (vec3(-0.8, 0.8), 0.05..0.4f64, vec3(0.0, 1.0)).prop_map(|(c, r, a)| Primitive::sphere(c, r, a)),
        (vec3(-1.0, 1.0), unit_axis(), vec3(0.0, 1.0)).prop_map(|(p, n, a)| Primitive::plane(p, n.normalized(), a)),
        (vec3(-0.9, 0.0), vec3(0.05, 0.8), vec3(0.0, 1.0)).prop_map(|(lo, ext, a)| Primitive::cuboid(lo, lo + ext, a)),
    ]
}

fn add_light() -> impl Strategy<Value = AddLight> {
    (vec3(-1.0, 1.0), vec3(0.0, 1.0), 0.0..1.0f64, 0.0..1.0f64).prop_map(|(position, color, intensity, diffuse)| AddLight {
        position,
        color,
        intensity,
        diffuse,
    })
}

fn small_image(w: usize, h: usize) -> impl Strategy<Value = Image> {
    prop::collection::vec(0.0f32..10.0, w * h * 3).prop_map(move |v| Image::from_raw(w, h, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scene_json_round_trip(prims in prop::collection::vec(primitive(), 1..6), pos in vec3(-0.8, 0.8), e in 0.1..50.0f64) {
        let desc = SceneDescription {
            primitives: prims,
            camera: Camera::canonical(8, 6),
            lights: vec![LightSpec::env_constant(0.3), LightSpec::point(pos, e, 0.05)],
        };
        let back = SceneDescription::from_json(&desc.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, desc);
    }

    #[test]
    fn identity_placement_fixes_points(p in vec3(-10.0, 10.0), c in vec3(-1.0, 1.0)) {
        let id = Sim3Placement::new(c, c, 1.0, Mat3::IDENTITY).unwrap();
        prop_assert!((id.apply_point(p) - p).length() <= 1e-12 * (1.0 + p.length()));
    }

    #[test]
    fn rig_transforms_compose(p1 in placement(), p2 in placement(), light_pos in vec3(-0.9, 0.9)) {
        let rig = CanonicalRig::new(Camera::canonical(4, 4), LightSpec::point(light_pos, 5.0, 0.1));
        let (cam1, light1) = transform_rig(&rig, &p1);
        let (cam12, light12) = transform_rig(&CanonicalRig::new(cam1, light1), &p2);
        let (cam, light) = transform_rig(&rig, &p1.then(&p2));
        prop_assert!((light12.position - light.position).length() < 1e-9);
        prop_assert!((cam12.position - cam.position).length() < 1e-9);
        prop_assert!((cam12.look_at - cam.look_at).length() < 1e-9);
        prop_assert!((light12.energy / light.energy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compositing_is_additive_and_homogeneous(
        amb in small_image(3, 2),
        o1 in small_image(3, 2),
        o2 in small_image(3, 2),
        a in 0.0..2.0f64,
        l1 in 0.0..1.0f64,
        l2 in 0.0..1.0f64,
        c1 in vec3(0.0, 1.0),
        c2 in vec3(0.0, 1.0),
    ) {
        let both = compose_relit(&amb, a, &[Component::new(&o1, l1, c1), Component::new(&o2, l2, c2)]).unwrap();
        let first = compose_relit(&amb, a, &[Component::new(&o1, l1, c1)]).unwrap();
        let second = compose_terms(&[Component::new(&o2, l2, c2)]).unwrap();
        let doubled = compose_relit(&amb, 2.0 * a, &[]).unwrap();
        let single = compose_relit(&amb, a, &[]).unwrap();
        for k in 0..both.data().len() {
            let sum = first.data()[k] as f64 + second.data()[k] as f64;
            prop_assert!((both.data()[k] as f64 - sum).abs() <= 1e-6 * sum.abs().max(1e-6));
            let twice = 2.0 * single.data()[k] as f64;
            prop_assert!((doubled.data()[k] as f64 - twice).abs() <= 1e-6 * twice.abs().max(1e-6));
        }
    }

    #[test]
    fn component_order_does_not_change_bits(
        amb in small_image(2, 2),
        imgs in prop::collection::vec(small_image(2, 2), 2..5),
        weights in prop::collection::vec((0.0..1.0f64, vec3(0.0, 1.0)), 5),
        shift in 1usize..4,
    ) {
        let comps: Vec<Component> = imgs.iter().zip(&weights).map(|(i, &(l, c))| Component::new(i, l, c)).collect();
        let mut rotated = comps.clone();
        rotated.rotate_left(shift % comps.len());
        let mut reversed = comps.clone();
        reversed.reverse();
        let base = compose_relit(&amb, 0.7, &comps).unwrap();
        prop_assert_eq!(&compose_relit(&amb, 0.7, &rotated).unwrap(), &base);
        prop_assert_eq!(&compose_relit(&amb, 0.7, &reversed).unwrap(), &base);
    }

    #[test]
    fn reinhard_is_monotone_bounded_and_invertible(x in 0.0..1e6f64, dx in 1e-9..1.0f64, y in 0.0..=0.99f64) {
        prop_assert!(reinhard(x + dx) > reinhard(x));
        prop_assert!((0.0..1.0).contains(&reinhard(x)));
        prop_assert!((reinhard(inverse_reinhard(y)) - y).abs() <= 1e-6);
    }

    #[test]
    fn pfm_round_trip_is_bit_exact(img in small_image(5, 3)) {
        prop_assert_eq!(decode_pfm(&encode_pfm(&img)).unwrap(), img);
    }

    #[test]
    fn tokens_do_not_depend_on_placement(light in add_light(), a in 0.0..1.0f64, p in placement()) {
        // The edit is written in canonical coordinates; the placement only
        // moves the rendered rig.
        let enc = TokenEncoders::with_defaults(3);
        let edit = LightEdit::spatial(a, light.clone());
        let rig = CanonicalRig::new(Camera::canonical(4, 4), LightSpec::point(light.position, 5.0, light.diffuse));
        let before = encode_edit(&edit, &enc).unwrap();
        let (_, placed) = transform_rig(&rig, &p);
        prop_assert!(placed.position != light.position || p.scale == 1.0);
        let after = encode_edit(&edit, &enc).unwrap();
        prop_assert_eq!(before.flat(), after.flat());
    }

    #[test]
    fn nearby_scalars_get_distinct_tokens(v in 0.0..0.999f64, gap in 1e-3..0.5f64) {
        let enc = TokenEncoders::with_defaults(0);
        let f = enc.get("lambda").unwrap();
        let w = (v + gap).min(1.0);
        let a = fourier_encode(v, f).unwrap();
        let b = fourier_encode(w, f).unwrap();
        let linf = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        prop_assert!(linf > 0.0);
    }

    #[test]
    fn sequence_length_is_fixed_by_mode(
        lights in prop::collection::vec(add_light(), 1..=3),
        a in 0.0..1.0f64,
        dg in -1.0..1.0f64,
    ) {
        let enc = TokenEncoders::with_defaults(1);
        let edits = [
            LightEdit::spatial(a, lights[0].clone()),
            LightEdit::multi(a, lights.clone()),
            LightEdit::global(a, dg),
        ];
        for edit in &edits {
            let seq = encode_edit(edit, &enc).unwrap();
            prop_assert_eq!(seq.len(), sequence_len(edit.mode()));
            let dropped = drop_for_cfg(&seq);
            prop_assert_eq!(dropped.len(), seq.len());
            prop_assert!(dropped.flat().iter().all(|&x| x == -1.0));
        }
        prop_assert_eq!(sequence_len(EditMode::Multi), 25);
    }

    #[test]
    fn identical_predictions_have_zero_diagonal(n in 2usize..8, vals in prop::collection::vec(0.0..1.0f64, 64)) {
        let m = ConfusionMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { vals[i * 8 + j] + 1e-3 });
        let pm = precision_metrics(&m).unwrap();
        prop_assert_eq!(pm.a, 0.0);
        prop_assert!(pm.ratio.is_infinite());
    }

    #[test]
    fn constant_matrix_has_unit_ratio(n in 2usize..10, c in 1e-6..10.0f64) {
        let pm = precision_metrics(&ConfusionMatrix::from_fn(n, |_, _| c)).unwrap();
        prop_assert!((pm.ratio - 1.0).abs() <= 1e-12);
    }
}
