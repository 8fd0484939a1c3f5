use relight::envmap::compare_gt_at_scale;
use relight::presets::{default_light, regression_scene};
use relight::render::RenderSettings;
use relight::Vec3;

fn main() -> relight::Result<()> {
    let desc = regression_scene("sphere_on_plane", 64, 64).unwrap();
    let light = default_light();
    let r = 0.05 * light.position.length();
    for s in [1.0, 0.5, 0.25, 0.1] {
        let c = compare_gt_at_scale(&desc.scene(), &desc.camera, &light, Vec3::ZERO, r, 256, s, &RenderSettings::default())?;
        println!("scale {s}: psnr {:.3} dB over {} px", c.psnr, c.mask.count());
    }
    Ok(())
}
