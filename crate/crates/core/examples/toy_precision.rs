//! Trains the toy model on lights along one trajectory and prints its
//! precision metrics next to the copy-input baseline.
//!
//! cargo run --release --example toy_precision -- [steps] [seed] [guidance]

use relight::flowmatch::SamplerConfig;
use relight::metrics::build_trajectories;
use relight::toy::{evaluate_trajectory, train_toy, trajectory_targets, ProbeEdit, ToyConfig};

fn main() -> relight::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize| args.get(i).map(|s| s.parse::<f64>().expect("numeric argument"));
    let traj = &build_trajectories()[0];
    let mut cfg = ToyConfig::on_trajectory(traj, arg(2).map_or(1, |s| s as u64));
    if let Some(steps) = arg(1) {
        cfg.train.steps = steps as usize;
    }
    let sampler = SamplerConfig {
        guidance: arg(3).unwrap_or(2.0),
        ..SamplerConfig::default()
    };

    let start = std::time::Instant::now();
    let run = train_toy(&cfg)?;
    let n = run.curve.raw.len().min(500);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    println!(
        "{} examples, loss first {n}: {:.3}, last {n}: {:.3}",
        run.examples,
        mean(&run.curve.raw[..n]),
        mean(&run.curve.raw[run.curve.raw.len() - n..])
    );

    let scene = cfg.scene("sphere_on_plane")?;
    let targets = trajectory_targets(&scene, &cfg.camera(), traj, &ProbeEdit::default(), &cfg.render)?;
    let report = evaluate_trajectory(&targets, |input, edit| run.net.relight(input, edit, &sampler))?;
    for (name, m) in [("model", report.metrics), ("copy", report.copy_metrics)] {
        println!("{name:>5}  A={:.5}  B_w={:.5}  B_w/A={:.3}", m.a, m.b_w, m.ratio);
    }
    println!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
