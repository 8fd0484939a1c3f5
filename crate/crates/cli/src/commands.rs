use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use relight::dataset::{synthesize_pairs, write_pair, CacheSpec, ComponentCache};
use relight::envmap::{pointlight_to_envmap, recovered_flux, render_panogt, DEFAULT_RADIUS_FRACTION};
use relight::flowmatch::{train, Example, SamplerConfig, ToyNet, TrainConfig};
use relight::io::{read_pfm, write_json, write_pfm, write_png_display, write_png_tonemapped};
use relight::math::Vec3;
use relight::metrics::{build_trajectories, PrecisionMetrics, Trajectory};
use relight::presets::regression_scene;
use relight::render::{render_full, render_light_component, RenderSettings};
use relight::scene::{EditMode, LightEdit, LightKind, SceneDescription};
use relight::simlight::{invariance_check, placement_from_parts, CanonicalRig};
use relight::tokenizer::TokenEncoders;
use relight::toy::{evaluate_trajectory, trajectory_targets, ProbeEdit};

use crate::{parse_floats, CliError, Command, Outcome, Sampling, SceneSource};

type Res<T> = Result<T, CliError>;

impl Sampling {
    fn settings(&self, seed: u64) -> Res<RenderSettings> {
        let s = RenderSettings {
            shadow_samples: self.shadow_samples,
            env_samples: self.env_samples,
            seed,
            ..RenderSettings::default()
        };
        s.validate()?;
        Ok(s)
    }
}

/// The scene, with the camera resized when `resolution` is given, and the
/// files it was read from.
fn load_scene(src: &SceneSource, resolution: Option<usize>, preset_res: usize) -> Res<(SceneDescription, Vec<PathBuf>)> {
    let (mut desc, inputs) = match (&src.scene, &src.preset) {
        (Some(path), _) => (SceneDescription::load(path)?, vec![path.clone()]),
        (None, Some(name)) => {
            let n = resolution.unwrap_or(preset_res);
            let desc = regression_scene(name, n, n).ok_or_else(|| CliError::Invalid(format!("unknown preset {name:?}")))?;
            (desc, Vec::new())
        }
        (None, None) => return Err(CliError::Invalid("one of --scene or --preset is required".into())),
    };
    if let Some(n) = resolution {
        desc.camera.resolution = [n, n];
    }
    desc.validate()?;
    Ok((desc, inputs))
}

fn is_png(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}{suffix}"))
}

fn parent_dirs(out: &Path) -> Res<()> {
    if let Some(p) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(p)?;
    }
    Ok(())
}

pub(crate) fn execute(command: &Command, seed: u64, out: &Path) -> Res<Outcome> {
    match command {
        Command::Render {
            source,
            resolution,
            sampling,
        } => render(source, *resolution, sampling, seed, out),
        Command::SynthPairs {
            source,
            mode,
            count,
            resolution,
            cache_spec,
            sampling,
        } => synth_pairs(source, *mode, *count, *resolution, cache_spec.as_deref(), sampling, seed, out),
        Command::TrainToy {
            pairs,
            steps,
            lr,
            batch_size,
            hidden,
            cfg_drop,
        } => {
            let cfg = TrainConfig {
                lr: *lr,
                steps: *steps,
                batch_size: *batch_size,
                cfg_drop_prob: *cfg_drop,
                seed,
                ..TrainConfig::default()
            };
            train_toy(pairs, *hidden, &cfg, out)
        }
        Command::Sample {
            model,
            input,
            edit,
            steps,
            guidance,
        } => sample(model, input, edit, sampler(*steps, *guidance, seed)?, out),
        Command::EvalPrecision {
            model,
            source,
            trajectory,
            steps,
            guidance,
            sampling,
        } => eval_precision(model, source, *trajectory, sampler(*steps, *guidance, seed)?, sampling, seed, out),
        Command::Panogt {
            source,
            light,
            r,
            height,
            center,
            render,
            resolution,
            sampling,
        } => {
            let c = parse_floats(center, 3, "--center")?;
            let opts = PanoOptions {
                light: *light,
                r: *r,
                height: *height,
                center: Vec3::new(c[0], c[1], c[2]),
                render: *render,
            };
            panogt(source, *resolution, &opts, sampling, seed, out)
        }
        Command::InvarianceCheck {
            source,
            light,
            scale,
            rot,
            translate,
            tolerance,
            resolution,
            sampling,
        } => {
            let r = parse_floats(rot, 4, "--rot")?;
            let t = parse_floats(translate, 3, "--translate")?;
            let placement = placement_from_parts(*scale, Vec3::new(r[0], r[1], r[2]), r[3], Vec3::new(t[0], t[1], t[2]))?;
            let (desc, inputs) = load_scene(source, *resolution, 64)?;
            let light = pick_light(&desc, *light)?;
            let rig = CanonicalRig::new(desc.camera.clone(), light);
            let report = invariance_check(&desc.scene(), &rig, &placement, &sampling.settings(seed)?)?;
            parent_dirs(out)?;
            write_json(out, &report)?;
            let failure = (report.max_rel_err > *tolerance).then(|| {
                CliError::Check(format!("max_rel_err {:e} exceeds tolerance {:e}", report.max_rel_err, tolerance))
            });
            Ok(Outcome {
                inputs,
                outputs: vec![out.to_path_buf()],
                summary: Some(serde_json::to_value(report).map_err(relight::Error::from)?),
                failure,
                ..Outcome::default()
            })
        }
        Command::Rerun { .. } => Err(CliError::Invalid("rerun is handled before dispatch".into())),
    }
}

fn sampler(steps: usize, guidance: f64, seed: u64) -> Res<SamplerConfig> {
    if steps == 0 || !guidance.is_finite() {
        return Err(CliError::Invalid("--steps must be >= 1 and --guidance finite".into()));
    }
    Ok(SamplerConfig { steps, guidance, seed })
}

fn pick_light(desc: &SceneDescription, idx: usize) -> Res<relight::scene::LightSpec> {
    let lights = desc.local_lights();
    lights
        .get(idx)
        .cloned()
        .ok_or_else(|| CliError::Invalid(format!("light index {idx} out of range: scene has {} local lights", lights.len())))
}

fn render(src: &SceneSource, resolution: Option<usize>, sampling: &Sampling, seed: u64, out: &Path) -> Res<Outcome> {
    let (desc, inputs) = load_scene(src, resolution, 64)?;
    let settings = sampling.settings(seed)?;
    let img = render_full(&desc.scene(), &desc.camera, &desc.local_lights(), desc.ambient()?.as_ref(), &settings)?;
    parent_dirs(out)?;
    if is_png(out) {
        write_png_tonemapped(out, &img)?;
    } else {
        write_pfm(out, &img)?;
    }
    Ok(Outcome {
        inputs,
        outputs: vec![out.to_path_buf()],
        ..Outcome::default()
    })
}

#[allow(clippy::too_many_arguments)]
fn synth_pairs(
    src: &SceneSource,
    mode: EditMode,
    count: usize,
    resolution: Option<usize>,
    cache_spec: Option<&Path>,
    sampling: &Sampling,
    seed: u64,
    out: &Path,
) -> Res<Outcome> {
    let (desc, mut inputs) = load_scene(src, resolution, 16)?;
    let spec = match cache_spec {
        Some(path) => {
            inputs.push(path.to_path_buf());
            serde_json::from_str::<CacheSpec>(&std::fs::read_to_string(path)?).map_err(relight::Error::from)?
        }
        None => CacheSpec::default(),
    };
    let cache = ComponentCache::render(&desc.scene(), &desc.camera, &spec, &sampling.settings(seed)?)?;
    if !cache.supports(mode) {
        return Err(CliError::Invalid(format!("the cache has no lights for {} edits", mode.name())));
    }
    let pairs = synthesize_pairs(&cache, mode, count, seed)?;
    std::fs::create_dir_all(out)?;
    let mut outputs = Vec::new();
    for (i, pair) in pairs.iter().enumerate() {
        outputs.extend(write_pair(out, i, pair)?);
    }
    Ok(Outcome {
        inputs,
        outputs,
        out_is_dir: true,
        summary: Some(json!({ "pairs": pairs.len(), "mode": mode.name() })),
        ..Outcome::default()
    })
}

fn train_toy(pairs_dir: &Path, hidden: usize, cfg: &TrainConfig, out: &Path) -> Res<Outcome> {
    let pairs = relight::dataset::read_pairs(pairs_dir)?;
    let first = pairs
        .first()
        .ok_or_else(|| CliError::Invalid(format!("no pair_* directories in {}", pairs_dir.display())))?;
    let mode = first.edit.mode();
    let (w, h) = first.input.dims();
    if pairs.iter().any(|p| p.edit.mode() != mode || p.input.dims() != (w, h)) {
        return Err(CliError::Invalid("pairs mix edit modes or resolutions".into()));
    }
    if hidden == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) || !(0.0..=1.0).contains(&cfg.cfg_drop_prob) {
        return Err(CliError::Invalid("--hidden and --batch-size must be >= 1, --lr > 0, --cfg-drop in [0, 1]".into()));
    }
    let mut net = ToyNet::new(mode, w, h, hidden, TokenEncoders::with_defaults(cfg.seed), cfg.seed);
    let examples = pairs.iter().map(|p| net.example_from_pair(p)).collect::<relight::Result<Vec<Example>>>()?;
    let curve = train(&mut net, &examples, cfg)?;
    parent_dirs(out)?;
    net.save(out)?;
    let loss_path = sibling(out, ".loss.json");
    write_json(&loss_path, &curve)?;
    let mut inputs = Vec::new();
    for i in 0..pairs.len() {
        let dir = relight::dataset::pair_dir(pairs_dir, i);
        for f in ["input.pfm", "target.pfm", "pair.json"] {
            if dir.join(f).exists() {
                inputs.push(dir.join(f));
            }
        }
    }
    Ok(Outcome {
        inputs,
        outputs: vec![out.to_path_buf(), loss_path],
        summary: Some(json!({
            "examples": examples.len(),
            "steps": cfg.steps,
            "final_loss": curve.smoothed.last().copied(),
        })),
        ..Outcome::default()
    })
}

fn sample(model: &Path, input: &Path, edit: &Path, cfg: SamplerConfig, out: &Path) -> Res<Outcome> {
    let net = ToyNet::load(model)?;
    let image = read_pfm(input)?;
    let edit: LightEdit = serde_json::from_str(&std::fs::read_to_string(edit)?).map_err(relight::Error::from)?;
    edit.validate()?;
    let result = net.relight(&image, &edit, &cfg)?;
    parent_dirs(out)?;
    if is_png(out) {
        write_png_display(out, &result)?;
    } else {
        write_pfm(out, &result)?;
    }
    Ok(Outcome {
        inputs: vec![model.to_path_buf(), input.to_path_buf()],
        outputs: vec![out.to_path_buf()],
        ..Outcome::default()
    })
}

#[derive(Serialize)]
struct PrecisionReport {
    scene: String,
    trajectory: Trajectory,
    probe: ProbeEdit,
    sampler_steps: usize,
    guidance: f64,
    #[serde(flatten)]
    metrics: PrecisionMetrics,
    copy_baseline: PrecisionMetrics,
    /// Row `i` is ground truth `i`, column `j` is prediction `j`.
    matrix: Vec<Vec<f64>>,
}

fn eval_precision(
    model: &Path,
    src: &SceneSource,
    trajectory: usize,
    cfg: SamplerConfig,
    sampling: &Sampling,
    seed: u64,
    out: &Path,
) -> Res<Outcome> {
    let net = ToyNet::load(model)?;
    if net.mode != EditMode::Spatial {
        return Err(CliError::Invalid(format!("eval-precision needs a spatial model, got {}", net.mode.name())));
    }
    let (desc, mut inputs) = load_scene(src, None, net.width)?;
    inputs.insert(0, model.to_path_buf());
    let mut camera = desc.camera.clone();
    camera.resolution = [net.width, net.height];
    let trajectories = build_trajectories();
    let traj = trajectories
        .get(trajectory)
        .ok_or_else(|| CliError::Invalid(format!("trajectory index {trajectory} out of range 0..{}", trajectories.len())))?;
    let probe = ProbeEdit::default();
    let targets = trajectory_targets(&desc.scene(), &camera, traj, &probe, &sampling.settings(seed)?)?;
    let report = evaluate_trajectory(&targets, |input, edit| net.relight(input, edit, &cfg))?;
    let n = report.matrix.n;
    let body = PrecisionReport {
        scene: src
            .preset
            .clone()
            .or_else(|| src.scene.as_ref().map(|p| p.display().to_string()))
            .unwrap_or_default(),
        trajectory: traj.clone(),
        probe,
        sampler_steps: cfg.steps,
        guidance: cfg.guidance,
        metrics: report.metrics,
        copy_baseline: report.copy_metrics,
        matrix: (0..n).map(|i| report.matrix.row(i).to_vec()).collect(),
    };
    parent_dirs(out)?;
    write_json(out, &body)?;
    let csv = out.with_extension("csv");
    std::fs::write(&csv, report.matrix.to_csv())?;
    let heat = out.with_extension("png");
    write_png_display(&heat, &report.matrix.heat_image())?;
    Ok(Outcome {
        inputs,
        outputs: vec![out.to_path_buf(), csv, heat],
        summary: Some(json!({
            "a": report.metrics.a,
            "b_w": report.metrics.b_w,
            "ratio": report.metrics.ratio,
            "copy_a": report.copy_metrics.a,
        })),
        ..Outcome::default()
    })
}

struct PanoOptions {
    light: usize,
    r: Option<f64>,
    height: usize,
    center: Vec3,
    render: bool,
}

fn panogt(
    src: &SceneSource,
    resolution: Option<usize>,
    opts: &PanoOptions,
    sampling: &Sampling,
    seed: u64,
    out: &Path,
) -> Res<Outcome> {
    let (desc, inputs) = load_scene(src, resolution, 64)?;
    let light = pick_light(&desc, opts.light)?;
    if light.kind != LightKind::PointSphere {
        return Err(CliError::Invalid(format!("light {} is not a point light", opts.light)));
    }
    let r = opts
        .r
        .unwrap_or(DEFAULT_RADIUS_FRACTION * (light.position - opts.center).length());
    let map = pointlight_to_envmap(&light, opts.center, r, opts.height)?;
    parent_dirs(out)?;
    write_pfm(out, map.image())?;
    let mut outputs = vec![out.to_path_buf()];
    if opts.render {
        let settings = sampling.settings(seed)?;
        let pano = render_panogt(&desc.scene(), &desc.camera, &map, &settings)?;
        let sphere = relight::scene::LightSpec { radius: r, ..light.clone() };
        let point = render_light_component(&desc.scene(), &desc.camera, &sphere, &settings)?;
        let (p, q) = (sibling(out, "_panogt.pfm"), sibling(out, "_pointgt.pfm"));
        write_pfm(&p, &pano)?;
        write_pfm(&q, &point)?;
        outputs.extend([p, q]);
    }
    let flux = recovered_flux(&map)?;
    let expected = light.color * light.energy;
    Ok(Outcome {
        inputs,
        outputs,
        summary: Some(json!({
            "energy": light.energy,
            "r": r,
            "height": opts.height,
            "flux": [flux.x, flux.y, flux.z],
            "flux_rel_err": ((flux - expected).length() / expected.length().max(f64::MIN_POSITIVE)),
        })),
        ..Outcome::default()
    })
}
