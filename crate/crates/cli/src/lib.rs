//! The `relight` command line.
//!
//! Every successful run writes a manifest next to its outputs recording the
//! argv, seed, thread count and content hashes of inputs and outputs.
//! `relight rerun --manifest m.json` replays it. Failures print one JSON
//! line on stderr and exit with 1; usage errors exit with 2.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

mod commands;
pub mod manifest;

use manifest::{manifest_path, FileDigest, Manifest, SCHEMA_VERSION};

/// Overrides `--threads` when set.
pub const THREADS_ENV: &str = "TOKENLIGHT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "relight", version, about = "Light-edit data synthesis, toy training and evaluation", args_override_self = true)]
pub struct Cli {
    /// Seed for every random stream [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Worker threads, 0 for one per core [default: 0]. TOKENLIGHT_THREADS overrides it
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output path; a file or directory depending on the command
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SceneSource {
    /// Scene JSON file
    #[arg(long)]
    pub scene: Option<PathBuf>,

    /// Built-in regression scene (sphere_on_plane, box_occluder, two_spheres, corner, rotated_box)
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args)]
pub struct Sampling {
    /// Light-surface samples per pixel
    #[arg(long, default_value_t = 16)]
    pub shadow_samples: u32,

    /// Hemisphere samples per pixel for ambient light
    #[arg(long, default_value_t = 64)]
    pub env_samples: u32,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene with all of its lights [--out default: render.pfm; .png writes a tone-mapped preview]
    Render {
        #[command(flatten)]
        source: SceneSource,
        /// Square resolution overriding the scene camera (presets default to 64)
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Synthesize training pairs from cached light components [--out default: pairs/]
    SynthPairs {
        #[command(flatten)]
        source: SceneSource,
        /// Edit mode: visible, spatial, diffuse or multi
        #[arg(long)]
        mode: relight::scene::EditMode,
        /// Number of pairs
        #[arg(long, default_value_t = 64)]
        count: usize,
        /// Square resolution overriding the scene camera (presets default to 16)
        #[arg(long)]
        resolution: Option<usize>,
        /// JSON file with the lights to cache; built-in layout when absent
        #[arg(long)]
        cache_spec: Option<PathBuf>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Train the toy flow-matching network on a pairs directory [--out default: model.bin]
    TrainToy {
        /// Directory written by synth-pairs
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value_t = 5000)]
        steps: usize,
        /// Peak learning rate (cosine-decayed)
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        /// Hidden width of both MLP layers
        #[arg(long, default_value_t = 256)]
        hidden: usize,
        /// Probability of dropping the condition during training
        #[arg(long, default_value_t = 0.1)]
        cfg_drop: f64,
    },
    /// Relight an image with a trained model [--out default: sample.png; .pfm keeps floats]
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Display-domain input image (PFM)
        #[arg(long)]
        input: PathBuf,
        /// LightEdit JSON
        #[arg(long)]
        edit: PathBuf,
        /// Euler steps
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Classifier-free guidance weight
        #[arg(long, default_value_t = 2.0)]
        guidance: f64,
    },
    /// Confusion matrix and precision metrics along a light trajectory [--out default: report.json]
    EvalPrecision {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        source: SceneSource,
        /// Index into the trajectory presets (0-5)
        #[arg(long, default_value_t = 0)]
        trajectory: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 2.0)]
        guidance: f64,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Point-light env-map surrogate and optional PanoGT render [--out default: env.pfm]
    Panogt {
        #[command(flatten)]
        source: SceneSource,
        /// Index among the scene's local lights
        #[arg(long, default_value_t = 0)]
        light: usize,
        /// Surrogate sphere radius [default: 5% of the light distance]
        #[arg(long)]
        r: Option<f64>,
        /// Env map height; width is twice this
        #[arg(long, default_value_t = 256)]
        height: usize,
        /// Capture centre "x,y,z"
        #[arg(long, default_value = "0,0,0")]
        center: String,
        /// Also write <stem>_panogt.pfm and <stem>_pointgt.pfm
        #[arg(long)]
        render: bool,
        /// Square resolution overriding the scene camera (presets default to 64)
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Render the canonical rig and a Sim(3)-placed copy and compare [--out default: invariance.json]
    InvarianceCheck {
        #[command(flatten)]
        source: SceneSource,
        /// Index among the scene's local lights
        #[arg(long, default_value_t = 0)]
        light: usize,
        #[arg(long, default_value_t = 3.0)]
        scale: f64,
        /// Rotation "ax,ay,az,degrees"
        #[arg(long, default_value = "0,1,0,0")]
        rot: String,
        /// Translation of the cube centre "x,y,z"
        #[arg(long, default_value = "0,0,0")]
        translate: String,
        /// Largest accepted max_rel_err; exit 1 above it
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        /// Square resolution overriding the scene camera (presets default to 64)
        #[arg(long)]
        resolution: Option<usize>,
        #[command(flatten)]
        sampling: Sampling,
    },
    /// Run a command again from its manifest; --threads, --seed and --out override the recorded values
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Render { .. } => "render",
            Command::SynthPairs { .. } => "synth-pairs",
            Command::TrainToy { .. } => "train-toy",
            Command::Sample { .. } => "sample",
            Command::EvalPrecision { .. } => "eval-precision",
            Command::Panogt { .. } => "panogt",
            Command::InvarianceCheck { .. } => "invariance-check",
            Command::Rerun { .. } => "rerun",
        }
    }

    fn default_out(&self) -> &'static str {
        match self {
            Command::Render { .. } => "render.pfm",
            Command::SynthPairs { .. } => "pairs",
            Command::TrainToy { .. } => "model.bin",
            Command::Sample { .. } => "sample.png",
            Command::EvalPrecision { .. } => "report.json",
            Command::Panogt { .. } => "env.pfm",
            Command::InvarianceCheck { .. } => "invariance.json",
            Command::Rerun { .. } => "",
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Core(relight::Error),
    Invalid(String),
    /// A check ran but its result is outside tolerance.
    Check(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(relight::Error::Io(_)) => "io",
            CliError::Core(relight::Error::Json(_)) => "json",
            CliError::Core(relight::Error::Pfm { .. }) => "pfm",
            CliError::Core(relight::Error::ModelFormat(_)) => "model_format",
            CliError::Core(relight::Error::Diverged { .. }) => "diverged",
            CliError::Core(_) | CliError::Invalid(_) => "invalid",
            CliError::Check(_) => "check_failed",
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => e.fmt(f),
            CliError::Invalid(m) | CliError::Check(m) => f.write_str(m),
        }
    }
}

impl From<relight::Error> for CliError {
    fn from(e: relight::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

fn report_error(kind: &str, message: String) {
    let line = serde_json::to_string(&ErrorLine { error: kind, message }).expect("error line serializes");
    eprintln!("{line}");
}

/// What a command touched, for its manifest.
#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Whether `--out` names a directory.
    pub out_is_dir: bool,
    /// Printed to stdout on success.
    pub summary: Option<serde_json::Value>,
    /// Set when outputs were written but a check failed.
    pub failure: Option<CliError>,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => return usage_error(e),
    };
    let argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), e.to_string());
            1
        }
    }
}

fn usage_error(e: clap::Error) -> i32 {
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
            let _ = e.print();
            0
        }
        _ => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ").to_string();
            report_error("usage", first);
            let rendered = e.render().to_string();
            eprint!("{}", rendered.split_once('\n').map_or("", |(_, rest)| rest));
            2
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Invalid(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(flag.unwrap_or(0)),
    }
}

fn dispatch(cli: Cli, argv: Vec<String>) -> Result<(), CliError> {
    if let Command::Rerun { manifest } = &cli.command {
        return rerun(manifest, &cli);
    }
    let threads = resolve_threads(cli.threads)?;
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(cli.command.default_out()));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Invalid(format!("thread pool: {e}")))?;
    let outcome = pool.install(|| commands::execute(&cli.command, seed, &out))?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: "relight".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cli.command.name().into(),
        argv,
        seed,
        threads: pool.current_num_threads(),
        inputs: digests(&outcome.inputs)?,
        outputs: digests(&outcome.outputs)?,
    };
    relight::io::write_json(&manifest_path(&out, outcome.out_is_dir), &manifest)?;
    if let Some(summary) = &outcome.summary {
        println!("{summary}");
    }
    match outcome.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    paths.iter().map(|p| FileDigest::of(p).map_err(CliError::from)).collect()
}

fn rerun(path: &Path, cli: &Cli) -> Result<(), CliError> {
    let manifest = Manifest::load(path).map_err(CliError::Invalid)?;
    let mut argv = manifest.argv.clone();
    if let Some(t) = cli.threads {
        argv.extend(["--threads".into(), t.to_string()]);
    }
    if let Some(s) = cli.seed {
        argv.extend(["--seed".into(), s.to_string()]);
    }
    if let Some(o) = &cli.out {
        argv.extend(["--out".into(), o.to_string_lossy().into_owned()]);
    }
    let inner = Cli::try_parse_from(std::iter::once("relight".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| CliError::Invalid(format!("manifest argv does not parse: {}", e.kind())))?;
    if matches!(inner.command, Command::Rerun { .. }) {
        return Err(CliError::Invalid("a manifest cannot record another rerun".into()));
    }
    dispatch(inner, argv)
}

pub(crate) fn parse_floats(text: &str, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if v.len() == n && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(CliError::Invalid(format!("{what} expects {n} comma-separated numbers, got {text:?}"))),
    }
}
